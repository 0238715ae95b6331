//! External datasets: a CSV file plus a sidecar column map.
//!
//! ```json
//! {
//!   "dataset_id": "idp_subset",
//!   "kind": "structured",
//!   "citation": "…",
//!   "doi": null,
//!   "csv": "idp_subset.csv",
//!   "columns": {"Latitude": "latitude", "Longitude": "longitude", "Depth": "depth_m"},
//!   "value_columns": {"Pb_D [pmol/kg]": {"measurement_type": "PbConc", "unit": "pmol/kg", "phase": "dissolved"}}
//! }
//! ```
//!
//! `columns` maps metadata columns to unified fields. Wide files list one
//! entry per value column in `value_columns`; long files instead map columns
//! to `measurement_type`, `value` and `unit` (and optionally `phase`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::headers::CanonicalField;
use super::merge::ExternalDataset;
use super::units::UnitRegistry;
use crate::extract::{MeasurementType, PbRecord, Phase, Provenance, SourceKind};

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("bad column map {path}: {reason}")]
    ColumnMap { path: String, reason: String },
    #[error("{path}: {reason}")]
    Csv { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueColumn {
    pub measurement_type: MeasurementType,
    pub unit: String,
    #[serde(default)]
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub dataset_id: String,
    pub kind: SourceKind,
    #[serde(default)]
    pub citation: String,
    #[serde(default)]
    pub doi: Option<String>,
    pub csv: String,
    #[serde(default)]
    pub columns: BTreeMap<String, CanonicalField>,
    #[serde(default)]
    pub value_columns: BTreeMap<String, ValueColumn>,
}

fn parse_number(cell: &str) -> Option<f64> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("na") {
        return None;
    }
    c.replace('−', "-").parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads the dataset named by a sidecar file, converting every value to its
/// canonical unit. Rows without a usable value are skipped.
pub fn load_external(sidecar: &Path, registry: &UnitRegistry) -> Result<ExternalDataset, ExternalError> {
    let sidecar_name = sidecar.display().to_string();
    let text = std::fs::read_to_string(sidecar).map_err(|e| ExternalError::Io { path: sidecar_name.clone(), reason: e.to_string() })?;
    let map: ColumnMap = serde_json::from_str(&text)
        .map_err(|e| ExternalError::ColumnMap { path: sidecar_name.clone(), reason: e.to_string() })?;
    if map.kind == SourceKind::Extracted {
        return Err(ExternalError::ColumnMap { path: sidecar_name, reason: "kind must be structured or scattered".into() });
    }
    let csv_path: PathBuf = sidecar.parent().unwrap_or(Path::new(".")).join(&map.csv);
    let csv_name = csv_path.display().to_string();
    let csv_err = |reason: String| ExternalError::Csv { path: csv_name.clone(), reason };
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| csv_err(e.to_string()))?;
    let headers: Vec<String> = reader.headers().map_err(|e| csv_err(e.to_string()))?.iter().map(str::to_string).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let field_col = |field: CanonicalField| map.columns.iter().find(|(_, f)| **f == field).and_then(|(h, _)| col(h));
    for h in map.columns.keys().chain(map.value_columns.keys()) {
        if col(h).is_none() {
            return Err(ExternalError::ColumnMap { path: sidecar_name, reason: format!("column `{h}` not in {}", map.csv) });
        }
    }
    let long_form = (field_col(CanonicalField::MeasurementType), field_col(CanonicalField::Value), field_col(CanonicalField::Unit));
    if map.value_columns.is_empty() && !matches!(long_form, (Some(_), Some(_), Some(_))) {
        return Err(ExternalError::ColumnMap {
            path: sidecar_name,
            reason: "needs value_columns or measurement_type/value/unit columns".into(),
        });
    }
    let (lat_c, lon_c, depth_c, date_c, phase_c) = (
        field_col(CanonicalField::Latitude),
        field_col(CanonicalField::Longitude),
        field_col(CanonicalField::DepthM),
        field_col(CanonicalField::SampleDate),
        field_col(CanonicalField::Phase),
    );
    let file_name = Path::new(&map.csv).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or(map.csv.clone());

    let mut records = Vec::new();
    for (row_index, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(e.to_string()))?;
        let cell = |i: Option<usize>| i.and_then(|i| row.get(i)).unwrap_or("");
        let mut values: Vec<(usize, MeasurementType, f64, String, Phase)> = Vec::new();
        for (header, vc) in &map.value_columns {
            let i = col(header).expect("checked above");
            if let Some(v) = parse_number(cell(Some(i))) {
                values.push((i, vc.measurement_type, v, vc.unit.clone(), vc.phase));
            }
        }
        if let (Some(tc), Some(vc), Some(uc)) = long_form {
            if let (Ok(mtype), Some(v)) = (cell(Some(tc)).parse::<MeasurementType>(), parse_number(cell(Some(vc)))) {
                let phase = cell(phase_c).parse().unwrap_or_default();
                values.push((vc, mtype, v, cell(Some(uc)).to_string(), phase));
            }
        }
        for (i, mtype, value, unit, phase) in values {
            let (value, conversion) = match registry.convert_units(value, &unit, mtype) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("{}: row {row_index}: {e}", map.dataset_id);
                    continue;
                }
            };
            let date = cell(date_c).trim();
            records.push(PbRecord {
                record_id: format!("{}/r{row_index:05}/c{i}", map.dataset_id),
                measurement_type: mtype,
                value,
                unit: conversion.to_unit,
                latitude: parse_number(cell(lat_c)),
                longitude: parse_number(cell(lon_c)),
                depth_m: parse_number(cell(depth_c)),
                phase: if mtype.is_ratio() && phase == Phase::Unknown { Phase::Unknown } else { phase },
                sample_date: (!date.is_empty()).then(|| date.to_string()),
                provenance: vec![Provenance {
                    source_kind: map.kind,
                    paper_id: map.dataset_id.clone(),
                    doi: map.doi.clone(),
                    table_id: file_name.clone(),
                    row_index,
                    column_header: headers[i].clone(),
                    source_uri: format!("file://{file_name}"),
                }],
                flags: Default::default(),
            });
        }
    }
    Ok(ExternalDataset { dataset_id: map.dataset_id, kind: map.kind, records, citation: map.citation })
}
