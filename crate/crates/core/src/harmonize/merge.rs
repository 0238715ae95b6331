use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::extract::{MeasurementType, PbRecord, SourceKind};

pub const COORD_TOL_DEG: f64 = 0.01;
pub const DEPTH_TOL_M: f64 = 1.0;
pub const VALUE_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalDataset {
    pub dataset_id: String,
    pub kind: SourceKind,
    pub records: Vec<PbRecord>,
    pub citation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeLogEntry {
    pub removed_record_id: String,
    pub removed_source: SourceKind,
    pub survivor_record_id: String,
    pub survivor_source: SourceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct UnifiedDataset {
    pub records: Vec<PbRecord>,
    pub merge_log: Vec<MergeLogEntry>,
    pub counts_by_source: BTreeMap<SourceKind, usize>,
    pub counts_by_type: BTreeMap<MeasurementType, usize>,
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}

/// Duplicate rule: same type, position within 0.01°, depth within 1 m (or
/// both unset), value within 1e-6 relative.
pub fn is_duplicate(a: &PbRecord, b: &PbRecord) -> bool {
    let scale = a.value.abs().max(b.value.abs());
    a.measurement_type == b.measurement_type
        && close(a.latitude, b.latitude, COORD_TOL_DEG)
        && close(a.longitude, b.longitude, COORD_TOL_DEG)
        && close(a.depth_m, b.depth_m, DEPTH_TOL_M)
        && (a.value - b.value).abs() <= VALUE_REL_TOL * scale
}

/// Concatenates all sources and folds duplicates into the highest-priority
/// record (structured > scattered > extracted, then record id). Survivors
/// are pairwise non-duplicate, so merging the output again changes nothing.
pub fn merge_sources(extracted: Vec<PbRecord>, externals: &[ExternalDataset]) -> UnifiedDataset {
    let mut all: Vec<PbRecord> = extracted;
    all.extend(externals.iter().flat_map(|d| d.records.iter().cloned()));
    all.sort_by(|a, b| {
        (Reverse(a.source_kind().priority()), &a.record_id)
            .cmp(&(Reverse(b.source_kind().priority()), &b.record_id))
            .then_with(|| a.value.total_cmp(&b.value))
    });

    let mut survivors: Vec<PbRecord> = Vec::new();
    let mut by_type: BTreeMap<MeasurementType, Vec<usize>> = BTreeMap::new();
    let mut merge_log = Vec::new();
    for record in all {
        let bucket = by_type.entry(record.measurement_type).or_default();
        match bucket.iter().copied().find(|&i| is_duplicate(&survivors[i], &record)) {
            Some(i) => {
                let survivor = &mut survivors[i];
                merge_log.push(MergeLogEntry {
                    removed_record_id: record.record_id.clone(),
                    removed_source: record.source_kind(),
                    survivor_record_id: survivor.record_id.clone(),
                    survivor_source: survivor.source_kind(),
                });
                for p in record.provenance {
                    if !survivor.provenance.contains(&p) {
                        survivor.provenance.push(p);
                    }
                }
            }
            None => {
                bucket.push(survivors.len());
                survivors.push(record);
            }
        }
    }
    survivors.sort_by(|a, b| a.record_id.cmp(&b.record_id));

    let mut counts_by_source: BTreeMap<SourceKind, usize> = SourceKind::ALL.iter().map(|k| (*k, 0)).collect();
    let mut counts_by_type: BTreeMap<MeasurementType, usize> = MeasurementType::ALL.iter().map(|t| (*t, 0)).collect();
    for r in &survivors {
        *counts_by_source.entry(r.source_kind()).or_default() += 1;
        *counts_by_type.entry(r.measurement_type).or_default() += 1;
    }
    UnifiedDataset { records: survivors, merge_log, counts_by_source, counts_by_type }
}
