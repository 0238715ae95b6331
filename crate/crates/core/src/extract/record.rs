use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight measurement types carried by the unified dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeasurementType {
    PbConc,
    Pb210Conc,
    R206_204,
    R207_204,
    R208_204,
    R206_207,
    R208_206,
    R208_207,
}

impl MeasurementType {
    pub const ALL: [MeasurementType; 8] = [
        MeasurementType::PbConc,
        MeasurementType::Pb210Conc,
        MeasurementType::R206_204,
        MeasurementType::R207_204,
        MeasurementType::R208_204,
        MeasurementType::R206_207,
        MeasurementType::R208_206,
        MeasurementType::R208_207,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementType::PbConc => "PbConc",
            MeasurementType::Pb210Conc => "Pb210Conc",
            MeasurementType::R206_204 => "R206_204",
            MeasurementType::R207_204 => "R207_204",
            MeasurementType::R208_204 => "R208_204",
            MeasurementType::R206_207 => "R206_207",
            MeasurementType::R208_206 => "R208_206",
            MeasurementType::R208_207 => "R208_207",
        }
    }

    pub fn is_ratio(self) -> bool {
        !matches!(self, MeasurementType::PbConc | MeasurementType::Pb210Conc)
    }

    /// Isotope ratio type for a numerator/denominator mass-number pair.
    pub fn from_isotope_pair(numerator: u16, denominator: u16) -> Option<Self> {
        match (numerator, denominator) {
            (206, 204) => Some(MeasurementType::R206_204),
            (207, 204) => Some(MeasurementType::R207_204),
            (208, 204) => Some(MeasurementType::R208_204),
            (206, 207) => Some(MeasurementType::R206_207),
            (208, 206) => Some(MeasurementType::R208_206),
            (208, 207) => Some(MeasurementType::R208_207),
            _ => None,
        }
    }

    /// Knowledge tree leaf that owns the extraction knowledge for this type.
    pub fn tree_leaf(self) -> &'static str {
        match self {
            MeasurementType::PbConc => "pb_conc_extraction",
            MeasurementType::Pb210Conc => "pb210_extraction",
            MeasurementType::R206_204 => "pb_isotope_206_204",
            MeasurementType::R207_204 => "pb_isotope_207_204",
            MeasurementType::R208_204 => "pb_isotope_208_204",
            MeasurementType::R206_207 => "pb_isotope_206_207",
            MeasurementType::R208_206 => "pb_isotope_208_206",
            MeasurementType::R208_207 => "pb_isotope_208_207",
        }
    }
}

impl fmt::Display for MeasurementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasurementType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MeasurementType::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown measurement type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Dissolved,
    Particulate,
    Total,
    #[default]
    Unknown,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Dissolved => "dissolved",
            Phase::Particulate => "particulate",
            Phase::Total => "total",
            Phase::Unknown => "unknown",
        }
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dissolved" => Ok(Phase::Dissolved),
            "particulate" => Ok(Phase::Particulate),
            "total" => Ok(Phase::Total),
            "unknown" | "" => Ok(Phase::Unknown),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

/// Where a record came from: a paper table, or one of the external dataset kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Extracted,
    Scattered,
    Structured,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [SourceKind::Extracted, SourceKind::Scattered, SourceKind::Structured];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Extracted => "extracted",
            SourceKind::Scattered => "scattered",
            SourceKind::Structured => "structured",
        }
    }

    /// Survivor priority during fusion; higher wins.
    pub fn priority(self) -> u8 {
        match self {
            SourceKind::Structured => 2,
            SourceKind::Scattered => 1,
            SourceKind::Extracted => 0,
        }
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "extracted" => Ok(SourceKind::Extracted),
            "scattered" => Ok(SourceKind::Scattered),
            "structured" => Ok(SourceKind::Structured),
            other => Err(format!("unknown source kind `{other}`")),
        }
    }
}

/// Pointer back to the exact cell a value was read from.
///
/// For external datasets `paper_id` holds the dataset id, `table_id` the file
/// name and `row_index` the data row in that file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub source_kind: SourceKind,
    pub paper_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    pub table_id: String,
    pub row_index: usize,
    pub column_header: String,
    pub source_uri: String,
}

/// One marine Pb measurement.
///
/// `provenance` is never empty; the first entry is the record's own source and
/// any further entries are duplicates folded into it during fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbRecord {
    pub record_id: String,
    pub measurement_type: MeasurementType,
    pub value: f64,
    pub unit: String,
    #[serde(default)]
    pub latitude: Option<f64>,
    #[serde(default)]
    pub longitude: Option<f64>,
    #[serde(default)]
    pub depth_m: Option<f64>,
    #[serde(default)]
    pub phase: Phase,
    #[serde(default)]
    pub sample_date: Option<String>,
    pub provenance: Vec<Provenance>,
    #[serde(default)]
    pub flags: BTreeSet<String>,
}

impl PbRecord {
    pub fn source(&self) -> &Provenance {
        &self.provenance[0]
    }

    pub fn source_kind(&self) -> SourceKind {
        self.source().source_kind
    }

    pub fn paper_id(&self) -> &str {
        &self.source().paper_id
    }

    pub fn is_located(&self) -> bool {
        matches!((self.latitude, self.longitude), (Some(lat), Some(lon))
            if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon))
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        self.flags.insert(flag.into());
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.contains(flag)
    }
}

pub mod flags {
    pub const BDL_SKIPPED: &str = "bdl_skipped";
    pub const NON_NUMERIC_CELL: &str = "non_numeric_cell";
    pub const UNLOCATED: &str = "unlocated";
    pub const COORD_AMBIGUOUS: &str = "coord_ambiguous";
    pub const DEPTH_AMBIGUOUS: &str = "depth_ambiguous";
    pub const COORD_OUT_OF_RANGE: &str = "coord_out_of_range";
    pub const DEPTH_SURFACE_CONVENTION: &str = "depth_surface_convention";
    pub const HEADER_UNRESOLVED: &str = "header_unresolved";
    pub const STATION_UNMATCHED: &str = "station_unmatched";
    pub const DATE_AMBIGUOUS: &str = "date_ambiguous";
}
