use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::extract::{MeasurementType, PbRecord, SourceKind};

/// Coarse ocean regions by latitude/longitude boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Arctic,
    Atlantic,
    Indian,
    Pacific,
    Southern,
    Unlocated,
}

impl Region {
    pub const ALL: [Region; 6] =
        [Region::Arctic, Region::Atlantic, Region::Indian, Region::Pacific, Region::Southern, Region::Unlocated];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Arctic => "arctic",
            Region::Atlantic => "atlantic",
            Region::Indian => "indian",
            Region::Pacific => "pacific",
            Region::Southern => "southern",
            Region::Unlocated => "unlocated",
        }
    }
}

/// North of 66°N is Arctic and south of 60°S Southern. Between them the
/// Atlantic spans 70°W–20°E (100°W–20°E north of 8°N, for the Gulf and
/// Caribbean), the Indian 20°E–120°E south of 30°N, and the rest is Pacific.
pub fn region_of(record: &PbRecord) -> Region {
    if !record.is_located() {
        return Region::Unlocated;
    }
    let (lat, lon) = (record.latitude.unwrap_or_default(), record.longitude.unwrap_or_default());
    let atlantic_west = if lat > 8.0 { -100.0 } else { -70.0 };
    if lat > 66.0 {
        Region::Arctic
    } else if lat < -60.0 {
        Region::Southern
    } else if (atlantic_west..=20.0).contains(&lon) {
        Region::Atlantic
    } else if (20.0..=120.0).contains(&lon) && lat < 30.0 {
        Region::Indian
    } else {
        Region::Pacific
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub by_type: BTreeMap<MeasurementType, usize>,
    pub by_source: BTreeMap<SourceKind, usize>,
    pub by_region: BTreeMap<Region, usize>,
}

impl StatsReport {
    pub fn render(&self) -> String {
        let mut out = format!("total {}\n", self.total);
        for (title, rows) in [
            ("type", self.by_type.iter().map(|(k, v)| (k.as_str(), *v)).collect::<Vec<_>>()),
            ("source", self.by_source.iter().map(|(k, v)| (k.as_str(), *v)).collect()),
            ("region", self.by_region.iter().map(|(k, v)| (k.as_str(), *v)).collect()),
        ] {
            let _ = writeln!(out, "\nby {title}");
            for (k, v) in rows {
                let _ = writeln!(out, "  {k:<12}{v:>8}");
            }
        }
        out
    }
}

/// Counts over all 8 types, 3 source kinds and the coarse regions; every key
/// is present even when zero.
pub fn stats_report(records: &[PbRecord]) -> StatsReport {
    let mut by_type: BTreeMap<_, _> = MeasurementType::ALL.iter().map(|t| (*t, 0)).collect();
    let mut by_source: BTreeMap<_, _> = SourceKind::ALL.iter().map(|k| (*k, 0)).collect();
    let mut by_region: BTreeMap<_, _> = Region::ALL.iter().map(|r| (*r, 0)).collect();
    for r in records {
        *by_type.get_mut(&r.measurement_type).expect("all types") += 1;
        *by_source.get_mut(&r.source_kind()).expect("all kinds") += 1;
        *by_region.get_mut(&region_of(r)).expect("all regions") += 1;
    }
    StatsReport { total: records.len(), by_type, by_source, by_region }
}
