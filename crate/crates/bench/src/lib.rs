//! Synthetic workloads for the benchmarks.

use compass_core::{MeasurementType, PbRecord, Phase, Provenance, SourceKind};

/// `n` dissolved Pb records spread over the open Pacific, cycling through the
/// measurement types. Deterministic for a given `seed`.
pub fn synthetic_records(n: usize, seed: u64) -> Vec<PbRecord> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let types = [
        (MeasurementType::PbConc, "pmol/kg", 5.0, 60.0),
        (MeasurementType::Pb210Conc, "dpm/100kg", 2.0, 30.0),
        (MeasurementType::R206_207, "ratio", 1.1, 1.25),
        (MeasurementType::R208_206, "ratio", 1.9, 2.2),
        (MeasurementType::R206_204, "ratio", 17.0, 19.5),
    ];
    (0..n)
        .map(|i| {
            let (mtype, unit, lo, hi) = types[i % types.len()];
            let paper = format!("S{:03}", i / 50);
            PbRecord {
                record_id: format!("{paper}/T1/r{i:05}"),
                measurement_type: mtype,
                value: lo + (hi - lo) * next(),
                unit: unit.to_string(),
                latitude: Some(-30.0 + 60.0 * next()),
                longitude: Some(-165.0 + 40.0 * next()),
                depth_m: Some((4000.0 * next()).round()),
                phase: Phase::default(),
                sample_date: None,
                provenance: vec![Provenance {
                    source_kind: SourceKind::Extracted,
                    source_uri: format!("file://{paper}.json"),
                    paper_id: paper,
                    doi: None,
                    table_id: "T1".into(),
                    row_index: i,
                    column_header: mtype.to_string(),
                }],
                flags: Default::default(),
            }
        })
        .collect()
}

/// Copies of `records` with every value nudged by `rel` so that they still
/// match the originals within tolerance.
pub fn perturbed(records: &[PbRecord], rel: f64) -> Vec<PbRecord> {
    records
        .iter()
        .map(|r| {
            let mut p = r.clone();
            p.record_id.push('\'');
            p.value *= 1.0 + rel;
            p
        })
        .collect()
}
