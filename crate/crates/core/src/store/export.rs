use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};

use super::{read_err, write_err, StoreError};
use crate::extract::{PbRecord, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
    GeoJson,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" => Ok(ExportFormat::Jsonl),
            "geojson" => Ok(ExportFormat::GeoJson),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

pub const CSV_COLUMNS: [&str; 18] = [
    "record_id",
    "measurement_type",
    "value",
    "unit",
    "latitude",
    "longitude",
    "depth_m",
    "phase",
    "sample_date",
    "source_kind",
    "paper_id",
    "doi",
    "table_id",
    "row_index",
    "column_header",
    "source_uri",
    "flags",
    "provenance_json",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat CSV: the record's own source is spread over columns and the full
/// provenance list is kept as JSON in the last column.
pub fn to_csv_string(records: &[PbRecord]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("write to memory");
    for r in records {
        let s = r.source();
        let flags: Vec<&str> = r.flags.iter().map(String::as_str).collect();
        w.write_record([
            r.record_id.clone(),
            r.measurement_type.to_string(),
            r.value.to_string(),
            r.unit.clone(),
            opt(r.latitude),
            opt(r.longitude),
            opt(r.depth_m),
            r.phase.as_str().to_string(),
            r.sample_date.clone().unwrap_or_default(),
            s.source_kind.as_str().to_string(),
            s.paper_id.clone(),
            s.doi.clone().unwrap_or_default(),
            s.table_id.clone(),
            s.row_index.to_string(),
            s.column_header.clone(),
            s.source_uri.clone(),
            flags.join(";"),
            serde_json::to_string(&r.provenance).expect("provenance serializes"),
        ])
        .expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// GeoJSON FeatureCollection with one Point per located record.
pub fn to_geojson(records: &[PbRecord]) -> Value {
    let features: Vec<Value> = records
        .iter()
        .filter(|r| r.is_located())
        .map(|r| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [r.longitude, r.latitude]},
                "properties": {
                    "record_id": r.record_id,
                    "measurement_type": r.measurement_type,
                    "value": r.value,
                    "unit": r.unit,
                    "depth_m": r.depth_m,
                    "paper_id": r.paper_id(),
                    "doi": r.source().doi,
                },
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn export(records: &[PbRecord], format: ExportFormat, path: &Path) -> Result<(), StoreError> {
    let body = match format {
        ExportFormat::Csv => to_csv_string(records),
        ExportFormat::Jsonl => records.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect(),
        ExportFormat::GeoJson => serde_json::to_string_pretty(&to_geojson(records)).expect("geojson serializes") + "\n",
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| write_err(path, e))?;
    }
    std::fs::write(path, body).map_err(|e| write_err(path, e))
}

pub fn load_jsonl(path: &Path) -> Result<Vec<PbRecord>, StoreError> {
    let file = std::fs::File::open(path).map_err(|e| read_err(path, e))?;
    let mut out = Vec::new();
    for (line, text) in BufReader::new(file).lines().enumerate() {
        let text = text.map_err(|e| read_err(path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&text)
                .map_err(|e| StoreError::Corrupt { path: path.display().to_string(), line, reason: e.to_string() })?,
        );
    }
    Ok(out)
}

/// Reads a CSV written by [`export`].
pub fn load_csv(path: &Path) -> Result<Vec<PbRecord>, StoreError> {
    let corrupt = |line: usize, reason: String| StoreError::Corrupt { path: path.display().to_string(), line, reason };
    let mut reader = csv::Reader::from_path(path).map_err(|e| read_err(path, e))?;
    let headers = reader.headers().map_err(|e| read_err(path, e))?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(corrupt(0, "unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| corrupt(line, e.to_string()))?;
        let f = |name: &str| row.get(CSV_COLUMNS.iter().position(|c| *c == name).expect("known column")).unwrap_or("");
        let num = |name: &str| -> Result<Option<f64>, StoreError> {
            let s = f(name);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| corrupt(line, format!("{name} `{s}` is not a number")))
            }
        };
        let provenance: Vec<Provenance> =
            serde_json::from_str(f("provenance_json")).map_err(|e| corrupt(line, e.to_string()))?;
        if provenance.is_empty() {
            return Err(corrupt(line, "empty provenance".into()));
        }
        out.push(PbRecord {
            record_id: f("record_id").to_string(),
            measurement_type: f("measurement_type").parse().map_err(|e| corrupt(line, e))?,
            value: num("value")?.ok_or_else(|| corrupt(line, "missing value".into()))?,
            unit: f("unit").to_string(),
            latitude: num("latitude")?,
            longitude: num("longitude")?,
            depth_m: num("depth_m")?,
            phase: f("phase").parse().map_err(|e| corrupt(line, e))?,
            sample_date: Some(f("sample_date")).filter(|s| !s.is_empty()).map(str::to_string),
            provenance,
            flags: f("flags").split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        });
    }
    Ok(out)
}
