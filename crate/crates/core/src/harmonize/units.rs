//! Unit registry and conversion to the canonical units.
//!
//! Units are parsed compositionally as `<prefix><base>[/<multiplier><prefix><base>]`
//! (also `<num> <den>-1`). Numerator bases are mol, g, Bq and dpm (and `M`
//! for mol/L); denominator bases are g, L and m3. Everything is reduced to
//! SI (mol, kg, Bq, m3) and bridged where needed:
//!
//! * mass to amount with the Pb molar mass,
//! * per volume to per mass with the reference seawater density.

use std::collections::{BTreeMap, HashMap};

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::prompt_digest;
use crate::extract::MeasurementType;
use crate::gateway::{FieldKind, OutputShape};
use crate::stage::StageContext;
use crate::validate::{execute_with_rollback, PipelineState, RollbackError, StepFailure};

pub const UNIT_NODE: &str = "unit_standardization";

pub const PB_MOLAR_MASS_G_PER_MOL: &str = "pb_molar_mass_g_per_mol";
pub const DPM_PER_BQ: &str = "dpm_per_bq";
pub const SEAWATER_DENSITY_KG_PER_M3: &str = "seawater_density_kg_per_m3";

static BUNDLED_REGISTRY: &str = include_str!("../../data/unit_registry.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("conversion rejected: {0}")]
    ConversionRejected(String),
    #[error("unit `{unit}` does not measure {mtype}")]
    DimensionalMismatch { unit: String, mtype: MeasurementType },
}

/// Broad physical category of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Concentration,
    Activity,
    Ratio,
}

impl Dimension {
    pub fn of(mtype: MeasurementType) -> Dimension {
        match mtype {
            MeasurementType::PbConc => Dimension::Concentration,
            MeasurementType::Pb210Conc => Dimension::Activity,
            _ => Dimension::Ratio,
        }
    }

    fn parse(s: &str) -> Option<Dimension> {
        match s.trim().to_ascii_lowercase().as_str() {
            "concentration" => Some(Dimension::Concentration),
            "activity" => Some(Dimension::Activity),
            "ratio" | "dimensionless" => Some(Dimension::Ratio),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversionKind {
    LinearFactor,
    Affine,
    MassToMolar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConstant {
    pub name: String,
    pub value: f64,
}

/// `to = from * factor + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitConversion {
    pub from_unit: String,
    pub to_unit: String,
    pub kind: ConversionKind,
    pub factor: f64,
    pub offset: f64,
    pub constants_used: Vec<NamedConstant>,
}

impl UnitConversion {
    pub fn apply(&self, value: f64) -> f64 {
        value * self.factor + self.offset
    }

    pub fn invert(&self, value: f64) -> f64 {
        (value - self.offset) / self.factor
    }
}

/// A conversion suggested by the backend, before gating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionProposal {
    pub from_unit: String,
    pub to_unit: String,
    pub from_dimension: String,
    pub kind: ConversionKind,
    pub factor: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Amount,
    Mass,
    Activity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Basis {
    Mass,
    Volume,
}

/// A parsed unit, as SI scale factors.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ParsedUnit {
    Ratio,
    PerBasis { quantity: Quantity, scale: f64, basis: Basis, basis_scale: f64 },
}

impl ParsedUnit {
    fn dimension(self) -> Dimension {
        match self {
            ParsedUnit::Ratio => Dimension::Ratio,
            ParsedUnit::PerBasis { quantity: Quantity::Activity, .. } => Dimension::Activity,
            ParsedUnit::PerBasis { .. } => Dimension::Concentration,
        }
    }
}

#[derive(Debug, Deserialize)]
struct RegistryDocument {
    constants: BTreeMap<String, f64>,
    canonical_units: BTreeMap<String, String>,
    prefixes: BTreeMap<String, f64>,
    aliases: BTreeMap<String, String>,
    dimensionless: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct UnitRegistry {
    constants: BTreeMap<String, f64>,
    canonical: BTreeMap<MeasurementType, String>,
    prefixes: HashMap<String, f64>,
    aliases: HashMap<String, String>,
    dimensionless: Vec<String>,
}

static MINUS_ONE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^(?P<num>\S+)\s+(?P<den>(?:\d+(?:\.\d+)?\s*)?[A-Za-z0-9]+?)-1$").expect("unit regex")
});
static MULTIPLIER: Lazy<Regex> = Lazy::new(|| Regex::new(r"^(\d+(?:\.\d+)?)\s*(.*)$").expect("multiplier regex"));

fn clean(unit: &str) -> String {
    let s = unit
        .trim()
        .replace(['µ', 'μ'], "u")
        .replace('³', "3")
        .replace("⁻¹", "-1")
        .replace('−', "-")
        .replace(['·', '⋅', '*'], " ")
        .replace('^', "");
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl UnitRegistry {
    pub fn bundled() -> &'static UnitRegistry {
        static REGISTRY: Lazy<UnitRegistry> =
            Lazy::new(|| UnitRegistry::parse(BUNDLED_REGISTRY).expect("bundled unit registry is valid"));
        &REGISTRY
    }

    pub fn parse(text: &str) -> Result<UnitRegistry, String> {
        let doc: RegistryDocument = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut canonical = BTreeMap::new();
        for (k, v) in doc.canonical_units {
            canonical.insert(k.parse::<MeasurementType>()?, v);
        }
        if let Some(missing) = MeasurementType::ALL.iter().find(|t| !canonical.contains_key(t)) {
            return Err(format!("no canonical unit for {missing}"));
        }
        for name in [PB_MOLAR_MASS_G_PER_MOL, DPM_PER_BQ, SEAWATER_DENSITY_KG_PER_M3] {
            match doc.constants.get(name) {
                Some(v) if v.is_finite() && *v > 0.0 => {}
                _ => return Err(format!("constant `{name}` missing or not positive")),
            }
        }
        let registry = UnitRegistry {
            constants: doc.constants,
            canonical,
            prefixes: doc.prefixes.into_iter().collect(),
            aliases: doc.aliases.into_iter().collect(),
            dimensionless: doc.dimensionless.iter().map(|d| d.to_lowercase()).collect(),
        };
        for (mtype, unit) in &registry.canonical {
            let parsed = registry.parse_unit(unit).map_err(|e| e.to_string())?;
            if parsed.dimension() != Dimension::of(*mtype) {
                return Err(format!("canonical unit `{unit}` does not fit {mtype}"));
            }
        }
        Ok(registry)
    }

    /// Replaces canonical units; each override must parse and fit its type.
    pub fn with_canonical_overrides(&self, overrides: &BTreeMap<MeasurementType, String>) -> Result<UnitRegistry, UnitError> {
        let mut out = self.clone();
        for (mtype, unit) in overrides {
            if self.parse_unit(unit)?.dimension() != Dimension::of(*mtype) {
                return Err(UnitError::DimensionalMismatch { unit: unit.clone(), mtype: *mtype });
            }
            out.canonical.insert(*mtype, unit.clone());
        }
        Ok(out)
    }

    pub fn constant(&self, name: &str) -> f64 {
        self.constants[name]
    }

    pub fn canonical_unit(&self, mtype: MeasurementType) -> &str {
        &self.canonical[&mtype]
    }

    fn split_prefix(&self, text: &str, bases: &[&'static str]) -> Option<(f64, &'static str)> {
        for base in bases {
            let matches = if base.chars().any(|c| c.is_ascii_uppercase()) && *base != "M" && *base != "L" {
                text.to_lowercase().ends_with(&base.to_lowercase())
            } else {
                text.ends_with(base)
            };
            if !matches || text.len() < base.len() {
                continue;
            }
            let prefix = &text[..text.len() - base.len()];
            if let Some(scale) = self.prefixes.get(prefix) {
                return Some((*scale, base));
            }
        }
        None
    }

    fn parse_numerator(&self, text: &str) -> Option<(Quantity, f64)> {
        let (scale, base) = self.split_prefix(text, &["mol", "Bq", "dpm", "g"])?;
        Some(match base {
            "mol" => (Quantity::Amount, scale),
            "g" => (Quantity::Mass, scale * 1e-3),
            "Bq" => (Quantity::Activity, scale),
            _ => (Quantity::Activity, scale / self.constant(DPM_PER_BQ)),
        })
    }

    fn parse_denominator(&self, text: &str) -> Option<(Basis, f64)> {
        let (multiplier, rest) = match MULTIPLIER.captures(text.trim()) {
            Some(c) => (c[1].parse::<f64>().ok()?, c.get(2).map_or("", |m| m.as_str()).trim().to_string()),
            None => (1.0, text.trim().to_string()),
        };
        if multiplier <= 0.0 {
            return None;
        }
        let (scale, base) = self.split_prefix(&rest, &["m3", "g", "L", "l"])?;
        if base == "m3" && scale != 1.0 {
            return None;
        }
        Some(match base {
            "g" => (Basis::Mass, multiplier * scale * 1e-3),
            "m3" => (Basis::Volume, multiplier),
            _ => (Basis::Volume, multiplier * scale * 1e-3),
        })
    }

    fn parse_unit(&self, unit: &str) -> Result<ParsedUnit, UnitError> {
        let unknown = || UnitError::UnknownUnit(unit.to_string());
        let mut s = clean(unit);
        if let Some(alias) = self.aliases.get(&s).or_else(|| self.aliases.get(&s.to_lowercase())) {
            s = alias.clone();
        }
        if self.dimensionless.contains(&s.to_lowercase()) {
            return Ok(ParsedUnit::Ratio);
        }
        // Molar: <prefix>M is <prefix>mol/L.
        if let Some(prefix) = s.strip_suffix('M') {
            if let Some(scale) = self.prefixes.get(prefix) {
                return Ok(ParsedUnit::PerBasis {
                    quantity: Quantity::Amount,
                    scale: *scale,
                    basis: Basis::Volume,
                    basis_scale: 1e-3,
                });
            }
        }
        let (num, den) = if let Some((n, d)) = s.split_once('/') {
            (n.trim().to_string(), d.trim().to_string())
        } else if let Some(c) = MINUS_ONE.captures(&s) {
            (c["num"].to_string(), c["den"].to_string())
        } else {
            return Err(unknown());
        };
        let (quantity, scale) = self.parse_numerator(&num).ok_or_else(unknown)?;
        let (basis, basis_scale) = self.parse_denominator(&den).ok_or_else(unknown)?;
        Ok(ParsedUnit::PerBasis { quantity, scale, basis, basis_scale })
    }

    /// True when the registry can read `unit`.
    pub fn recognizes(&self, unit: &str) -> bool {
        self.parse_unit(unit).is_ok()
    }

    pub fn dimension_of(&self, unit: &str) -> Result<Dimension, UnitError> {
        Ok(self.parse_unit(unit)?.dimension())
    }

    /// Conversion between two registry units of the same measurement type.
    pub fn conversion_between(&self, from: &str, to: &str, mtype: MeasurementType) -> Result<UnitConversion, UnitError> {
        let a = self.parse_unit(from)?;
        let b = self.parse_unit(to)?;
        let dim = Dimension::of(mtype);
        for (u, p) in [(from, a), (to, b)] {
            if p.dimension() != dim {
                return Err(UnitError::DimensionalMismatch { unit: u.to_string(), mtype });
            }
        }
        let mut constants = Vec::new();
        let mut kind = ConversionKind::LinearFactor;
        let factor = match (a, b) {
            (ParsedUnit::Ratio, ParsedUnit::Ratio) => 1.0,
            (
                ParsedUnit::PerBasis { quantity: qa, scale: sa, basis: ba, basis_scale: bsa },
                ParsedUnit::PerBasis { quantity: qb, scale: sb, basis: bb, basis_scale: bsb },
            ) => {
                let molar_mass = self.constant(PB_MOLAR_MASS_G_PER_MOL) * 1e-3;
                let density = self.constant(SEAWATER_DENSITY_KG_PER_M3);
                // SI quantity per SI basis of one `from` unit
                let mut f = sa / bsa;
                match (qa, qb) {
                    (Quantity::Mass, Quantity::Amount) => {
                        f /= molar_mass;
                        kind = ConversionKind::MassToMolar;
                    }
                    (Quantity::Amount, Quantity::Mass) => {
                        f *= molar_mass;
                        kind = ConversionKind::MassToMolar;
                    }
                    _ => {}
                }
                if kind == ConversionKind::MassToMolar {
                    constants.push(NamedConstant {
                        name: PB_MOLAR_MASS_G_PER_MOL.into(),
                        value: self.constant(PB_MOLAR_MASS_G_PER_MOL),
                    });
                }
                match (ba, bb) {
                    (Basis::Volume, Basis::Mass) => f /= density,
                    (Basis::Mass, Basis::Volume) => f *= density,
                    _ => {}
                }
                if ba != bb {
                    constants.push(NamedConstant { name: SEAWATER_DENSITY_KG_PER_M3.into(), value: density });
                }
                f / (sb / bsb)
            }
            _ => unreachable!("dimensions already matched"),
        };
        if [from, to].iter().any(|u| clean(u).to_lowercase().contains("dpm")) {
            constants.push(NamedConstant { name: DPM_PER_BQ.into(), value: self.constant(DPM_PER_BQ) });
        }
        Ok(UnitConversion { from_unit: from.to_string(), to_unit: to.to_string(), kind, factor, offset: 0.0, constants_used: constants })
    }

    /// Conversion from `from_unit` to the canonical unit of `mtype`.
    pub fn conversion_to_canonical(&self, from_unit: &str, mtype: MeasurementType) -> Result<UnitConversion, UnitError> {
        self.conversion_between(from_unit, self.canonical_unit(mtype), mtype)
    }

    pub fn convert_units(&self, value: f64, from_unit: &str, mtype: MeasurementType) -> Result<(f64, UnitConversion), UnitError> {
        let c = self.conversion_to_canonical(from_unit, mtype)?;
        Ok((c.apply(value), c))
    }

    /// Gates a backend-proposed conversion: declared and apparent dimension
    /// must match the type, the target must be canonical, the factor positive,
    /// agreement with the registry when it knows the unit, and a round trip
    /// within 1e-12 relative.
    pub fn accept_proposal(&self, p: &ConversionProposal, mtype: MeasurementType) -> Result<UnitConversion, UnitError> {
        let mismatch = || UnitError::DimensionalMismatch { unit: p.from_unit.clone(), mtype };
        let dim = Dimension::of(mtype);
        match Dimension::parse(&p.from_dimension) {
            Some(d) if d == dim => {}
            Some(_) => return Err(mismatch()),
            None => return Err(UnitError::ConversionRejected(format!("unknown dimension `{}`", p.from_dimension))),
        }
        if guess_dimension(&p.from_unit).is_some_and(|d| d != dim) {
            return Err(mismatch());
        }
        if p.to_unit.trim() != self.canonical_unit(mtype) {
            return Err(UnitError::ConversionRejected(format!(
                "target `{}` is not the canonical `{}`",
                p.to_unit,
                self.canonical_unit(mtype)
            )));
        }
        if !(p.factor.is_finite() && p.factor > 0.0 && p.offset.is_finite()) {
            return Err(UnitError::ConversionRejected(format!("factor {} / offset {} unusable", p.factor, p.offset)));
        }
        if p.kind != ConversionKind::Affine && p.offset != 0.0 {
            return Err(UnitError::ConversionRejected("offset on a non-affine conversion".into()));
        }
        if let Ok(known) = self.conversion_to_canonical(&p.from_unit, mtype) {
            if ((known.factor - p.factor) / known.factor).abs() > 1e-9 || p.offset != 0.0 {
                return Err(UnitError::ConversionRejected(format!(
                    "factor {} disagrees with registry factor {}",
                    p.factor, known.factor
                )));
            }
        } else if let Err(UnitError::DimensionalMismatch { .. }) = self.conversion_to_canonical(&p.from_unit, mtype) {
            return Err(mismatch());
        }
        let conversion = UnitConversion {
            from_unit: p.from_unit.clone(),
            to_unit: p.to_unit.clone(),
            kind: p.kind,
            factor: p.factor,
            offset: p.offset,
            constants_used: if p.kind == ConversionKind::MassToMolar {
                vec![NamedConstant { name: PB_MOLAR_MASS_G_PER_MOL.into(), value: self.constant(PB_MOLAR_MASS_G_PER_MOL) }]
            } else {
                vec![]
            },
        };
        for x in [1.0, 1e-3, 0.5, 123.456, 1e6] {
            let back = conversion.invert(conversion.apply(x));
            if (back - x).abs() > 1e-12 * x.abs() {
                return Err(UnitError::ConversionRejected(format!("round trip of {x} gave {back}")));
            }
        }
        Ok(conversion)
    }
}

/// Apparent dimension of a unit string from its tokens, when one is evident.
pub fn guess_dimension(unit: &str) -> Option<Dimension> {
    let u = clean(unit).to_lowercase();
    if ["bq", "dpm", "dps", "ci"].iter().any(|t| u.contains(t)) {
        return Some(Dimension::Activity);
    }
    if u.contains("mol") || u.ends_with('m') && u.len() <= 2 || u.contains("g/") || u.contains("g ") || u.starts_with("pp") {
        return Some(Dimension::Concentration);
    }
    if ["ratio", "dimensionless", "unitless"].iter().any(|t| u.contains(t)) {
        return Some(Dimension::Ratio);
    }
    None
}

/// Registry conversion, or a gated backend proposal for units the registry
/// does not know. Proposals run as their own rollback step.
pub fn resolve_conversion(
    registry: &UnitRegistry,
    unit: &str,
    mtype: MeasurementType,
    ctx: &StageContext<'_>,
    state: &mut PipelineState,
) -> Result<UnitConversion, UnitError> {
    match registry.conversion_to_canonical(unit, mtype) {
        Err(UnitError::UnknownUnit(_)) => {}
        other => return other,
    }
    let context = format!(
        "Unit: {unit}\nMeasurement type: {mtype}\nCanonical unit: {}",
        registry.canonical_unit(mtype)
    );
    let bundle = ctx.prompt(UNIT_NODE, &context).map_err(|e| UnitError::ConversionRejected(e.to_string()))?;
    let digest = prompt_digest(&bundle.system_text, &bundle.user_text);
    let subject = format!("{mtype}:{unit}");
    let tag = format!("convert_unit|{subject}");
    let shape = OutputShape::Mapping(vec![
        ("from_unit", FieldKind::String),
        ("to_unit", FieldKind::String),
        ("from_dimension", FieldKind::String),
        ("kind", FieldKind::String),
        ("factor", FieldKind::Number),
        ("offset", FieldKind::Number),
    ]);
    let outcome = execute_with_rollback(state, "convert_unit", &subject, &digest, ctx.max_attempts, |attempt| {
        let reply = ctx.ask::<ConversionProposal>(&bundle, &tag, attempt, 256, &shape)?;
        let proposal: ConversionProposal =
            serde_json::from_value(reply).map_err(|e| StepFailure::Unparseable(e.to_string()))?;
        if proposal.from_unit.trim() != unit.trim() {
            let reason = format!("proposal is for `{}`", proposal.from_unit);
            return Err(StepFailure::Invalid { partial: proposal, reason });
        }
        match registry.accept_proposal(&proposal, mtype) {
            Ok(_) => Ok(proposal),
            Err(e) => Err(StepFailure::Invalid { partial: proposal, reason: e.to_string() }),
        }
    });
    match outcome {
        Ok(p) => registry.accept_proposal(&p, mtype),
        Err(RollbackError::QuarantinedSubject { last_partial: Some(p), .. }) => registry.accept_proposal(&p, mtype),
        Err(e) => Err(UnitError::ConversionRejected(e.to_string())),
    }
}
