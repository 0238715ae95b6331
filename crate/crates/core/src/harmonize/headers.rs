//! Header normalization onto the unified schema: a bundled alias table first,
//! the backend only for headers the rules cannot place.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::digest::prompt_digest;
use crate::extract::MeasurementType;
use crate::gateway::{FieldKind, OutputShape};
use crate::stage::StageContext;
use crate::validate::{execute_with_rollback, PipelineState, StepFailure};

pub const HEADER_NODE: &str = "header_normalization";

static BUNDLED_ALIASES: &str = include_str!("../../data/header_aliases.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalField {
    /// The column holds values of one measurement type.
    MeasurementType,
    Value,
    Unit,
    Latitude,
    Longitude,
    DepthM,
    Phase,
    SampleDate,
    StationLabel,
    Ignore,
}

impl CanonicalField {
    pub const ALL: [CanonicalField; 10] = [
        CanonicalField::MeasurementType,
        CanonicalField::Value,
        CanonicalField::Unit,
        CanonicalField::Latitude,
        CanonicalField::Longitude,
        CanonicalField::DepthM,
        CanonicalField::Phase,
        CanonicalField::SampleDate,
        CanonicalField::StationLabel,
        CanonicalField::Ignore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CanonicalField::MeasurementType => "measurement_type",
            CanonicalField::Value => "value",
            CanonicalField::Unit => "unit",
            CanonicalField::Latitude => "latitude",
            CanonicalField::Longitude => "longitude",
            CanonicalField::DepthM => "depth_m",
            CanonicalField::Phase => "phase",
            CanonicalField::SampleDate => "sample_date",
            CanonicalField::StationLabel => "station_label",
            CanonicalField::Ignore => "ignore",
        }
    }
}

impl fmt::Display for CanonicalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CanonicalField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        CanonicalField::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown unified field `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderMapping {
    pub source_header: String,
    pub canonical_field: CanonicalField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_type: Option<MeasurementType>,
    pub confidence_note: String,
    /// Set when neither the rules nor the backend could place the header.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unresolved: bool,
}

impl HeaderMapping {
    fn new(header: &str, field: CanonicalField, mtype: Option<MeasurementType>, note: impl Into<String>) -> Self {
        HeaderMapping {
            source_header: header.to_string(),
            canonical_field: field,
            measurement_type: mtype,
            confidence_note: note.into(),
            unresolved: false,
        }
    }
}

#[derive(Debug, Deserialize)]
struct AliasDocument {
    fields: HashMap<String, Vec<String>>,
    measurement_types: HashMap<String, Vec<String>>,
    ignore: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    fields: HashMap<String, CanonicalField>,
    types: HashMap<String, MeasurementType>,
    ignore: HashSet<String>,
}

impl AliasTable {
    pub fn bundled() -> &'static AliasTable {
        static TABLE: Lazy<AliasTable> =
            Lazy::new(|| AliasTable::parse(BUNDLED_ALIASES).expect("bundled alias table is valid"));
        &TABLE
    }

    pub fn parse(text: &str) -> Result<AliasTable, String> {
        let doc: AliasDocument = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut table = AliasTable::default();
        for (field, aliases) in doc.fields {
            let field: CanonicalField = field.parse()?;
            for a in aliases {
                table.fields.insert(normalize_header_text(&a), field);
            }
        }
        for (mtype, aliases) in doc.measurement_types {
            let mtype: MeasurementType = mtype.parse()?;
            for a in aliases {
                table.types.insert(normalize_header_text(&a), mtype);
            }
        }
        table.ignore = doc.ignore.iter().map(|a| normalize_header_text(a)).collect();
        Ok(table)
    }
}

static LATEX: Lazy<Regex> = Lazy::new(|| Regex::new(r"\\(?:mathrm|text|rm)|[$^{}\\]").expect("latex regex"));
static PARENS: Lazy<Regex> = Lazy::new(|| Regex::new(r"\([^)]*\)|\[[^\]]*\]").expect("parens regex"));
static SPACES: Lazy<Regex> = Lazy::new(|| Regex::new(r"\s+").expect("space regex"));
static RATIO: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?:(\d{3})\s*pb|pb\s*-?\s*(\d{3}))\s*/\s*(?:(\d{3})\s*pb|pb\s*-?\s*(\d{3}))").expect("ratio regex")
});
static BARE_RATIO: Lazy<Regex> = Lazy::new(|| Regex::new(r"^(20[4678])\s*/\s*(20[4678])$").expect("bare ratio regex"));
static NEG_HEMISPHERE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?:°\s*[SW]\b|\(\s*[SW]\s*\))").expect("hemisphere regex"));
static KM: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)\bkm\b").expect("km regex"));

const UNCERTAINTY_TOKENS: [&str; 10] = ["2se", "2sd", "1se", "1sd", "se", "sd", "±", "error", "err", "uncertainty"];

/// Lookup key for a header: markup stripped, lower case, parenthetical and
/// bracketed parts dropped, whitespace collapsed.
pub fn normalize_header_text(header: &str) -> String {
    let plain = LATEX.replace_all(header, "");
    let lower = plain.to_lowercase().replace(['°', '℃'], " ").replace('−', "-");
    let no_parens = PARENS.replace_all(&lower, " ");
    let spaced = SPACES.replace_all(no_parens.replace(',', " ").trim(), " ").into_owned();
    spaced.trim_matches(|c: char| c == ':' || c == ';' || c.is_whitespace()).to_string()
}

/// Isotope ratio named by a header, in any of the usual notations.
pub fn ratio_in_header(header: &str) -> Option<MeasurementType> {
    let plain = LATEX.replace_all(header, "").to_lowercase();
    if let Some(c) = RATIO.captures(&plain) {
        let num = c.get(1).or(c.get(2))?.as_str().parse().ok()?;
        let den = c.get(3).or(c.get(4))?.as_str().parse().ok()?;
        return MeasurementType::from_isotope_pair(num, den);
    }
    let key = normalize_header_text(header);
    let c = BARE_RATIO.captures(&key)?;
    MeasurementType::from_isotope_pair(c[1].parse().ok()?, c[2].parse().ok()?)
}

/// True when the header declares a southern or western hemisphere, e.g.
/// "Latitude (°S)", so unsigned cells are negated.
pub fn negative_hemisphere_hint(header: &str) -> bool {
    NEG_HEMISPHERE.is_match(header)
}

/// Unit a depth column's bare numbers are in.
pub fn depth_unit_hint(header: &str) -> &'static str {
    if KM.is_match(header) {
        "km"
    } else {
        "m"
    }
}

/// The deterministic layer. `None` means the rules cannot place the header.
pub fn rule_mapping(header: &str, aliases: &AliasTable) -> Option<HeaderMapping> {
    let key = normalize_header_text(header);
    if key.is_empty() {
        return Some(HeaderMapping::new(header, CanonicalField::Ignore, None, "blank header"));
    }
    if key.split(' ').any(|t| UNCERTAINTY_TOKENS.contains(&t)) || aliases.ignore.contains(&key) {
        return Some(HeaderMapping::new(header, CanonicalField::Ignore, None, "alias table: ignored column"));
    }
    if let Some(mtype) = ratio_in_header(header) {
        return Some(HeaderMapping::new(header, CanonicalField::MeasurementType, Some(mtype), "isotope ratio notation"));
    }
    if let Some(mtype) = aliases.types.get(&key) {
        return Some(HeaderMapping::new(header, CanonicalField::MeasurementType, Some(*mtype), format!("alias `{key}`")));
    }
    aliases
        .fields
        .get(&key)
        .map(|field| HeaderMapping::new(header, *field, None, format!("alias `{key}`")))
}

fn backend_mapping(
    header: &str,
    ctx: &StageContext<'_>,
    state: &mut PipelineState,
) -> HeaderMapping {
    let unresolved = |reason: String| HeaderMapping {
        unresolved: true,
        ..HeaderMapping::new(header, CanonicalField::Ignore, None, reason)
    };
    let bundle = match ctx.prompt(HEADER_NODE, &format!("Header: {header}")) {
        Ok(b) => b,
        Err(e) => return unresolved(e.to_string()),
    };
    let digest = prompt_digest(&bundle.system_text, &bundle.user_text);
    let tag = format!("normalize_header|{header}");
    let shape = OutputShape::Mapping(vec![("field", FieldKind::String), ("measurement_type", FieldKind::OptionalString)]);
    let outcome = execute_with_rollback(state, "normalize_header", header, &digest, ctx.max_attempts, |attempt| {
        let reply = ctx.ask::<HeaderMapping>(&bundle, &tag, attempt, 128, &shape)?;
        let field: CanonicalField =
            reply["field"].as_str().unwrap_or_default().parse().map_err(StepFailure::Unparseable)?;
        let mtype = match reply["measurement_type"].as_str() {
            Some(t) if !t.trim().is_empty() => Some(t.parse::<MeasurementType>().map_err(StepFailure::Unparseable)?),
            _ => None,
        };
        if field == CanonicalField::MeasurementType && mtype.is_none() {
            return Err(StepFailure::Unparseable("measurement_type column without a type".into()));
        }
        Ok(HeaderMapping::new(header, field, mtype, "backend"))
    });
    outcome.unwrap_or_else(|e| unresolved(e.to_string()))
}

/// One mapping per header, in order. Unplaceable headers map to `ignore`
/// with `unresolved` set.
pub fn normalize_headers(
    headers: &[String],
    aliases: &AliasTable,
    ctx: &StageContext<'_>,
    state: &mut PipelineState,
) -> Vec<HeaderMapping> {
    headers
        .iter()
        .map(|h| rule_mapping(h, aliases).unwrap_or_else(|| backend_mapping(h, ctx, state)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(h: &str) -> Option<(CanonicalField, Option<MeasurementType>)> {
        rule_mapping(h, AliasTable::bundled()).map(|m| (m.canonical_field, m.measurement_type))
    }

    #[test]
    fn alias_layer() {
        assert_eq!(field("Depth (m)"), Some((CanonicalField::DepthM, None)));
        assert_eq!(field("Lat."), Some((CanonicalField::Latitude, None)));
        assert_eq!(field("Latitude (°N)"), Some((CanonicalField::Latitude, None)));
        assert_eq!(field("diss. Pb"), Some((CanonicalField::MeasurementType, Some(MeasurementType::PbConc))));
        assert_eq!(field("Chl-a (µg/L)"), Some((CanonicalField::Ignore, None)));
        assert_eq!(field("Station"), Some((CanonicalField::StationLabel, None)));
        assert_eq!(field("$^{210}$Pb (dpm/100 kg)"), Some((CanonicalField::MeasurementType, Some(MeasurementType::Pb210Conc))));
        assert_eq!(field("Sampling depth below sea surface (m)"), None);
    }

    #[test]
    fn ratio_notations() {
        let r = Some((CanonicalField::MeasurementType, Some(MeasurementType::R206_207)));
        assert_eq!(field("206Pb/207Pb"), r);
        assert_eq!(field("$^{206}$Pb/$^{207}$Pb"), r);
        assert_eq!(field("Pb-206/Pb-207"), r);
        assert_eq!(field("206/207"), r);
        assert_eq!(field("208Pb/204Pb"), Some((CanonicalField::MeasurementType, Some(MeasurementType::R208_204))));
        assert_eq!(field("206Pb/207Pb 2SE"), Some((CanonicalField::Ignore, None)));
        assert_eq!(ratio_in_header("205Pb/207Pb"), None);
    }

    #[test]
    fn hints() {
        assert!(negative_hemisphere_hint("Longitude (°W)"));
        assert!(negative_hemisphere_hint("Lat (S)"));
        assert!(!negative_hemisphere_hint("Longitude (°E)"));
        assert_eq!(depth_unit_hint("Depth (km)"), "km");
        assert_eq!(depth_unit_hint("Depth (m)"), "m");
    }

    #[test]
    fn total_over_headers() {
        use crate::gateway::{Gateway, GatewayConfig, MockBackend, MockFixtureTable};
        use std::sync::Arc;
        let tree = crate::knowledge_tree::marine_pb_tree();
        let gateway = Gateway::new(Arc::new(MockBackend::new(MockFixtureTable::default())), GatewayConfig::default());
        let ctx = StageContext::new(&tree, &gateway);
        let headers: Vec<String> =
            ["Depth (m)", "mystery column", "", "208Pb/206Pb"].iter().map(|s| s.to_string()).collect();
        let mut state = PipelineState::new();
        let maps = normalize_headers(&headers, AliasTable::bundled(), &ctx, &mut state);
        assert_eq!(maps.len(), headers.len());
        assert_eq!(maps[1].canonical_field, CanonicalField::Ignore);
        assert!(maps[1].unresolved);
        assert!(!maps[2].unresolved);
        assert_eq!(maps[3].measurement_type, Some(MeasurementType::R208_206));
    }
}
