//! Draft records from target tables, and metadata association.

mod associate;
mod coords;
mod depth;
mod record;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::classify::TableCategory;
use crate::corpus::{ParsedPaper, TableBlock};
use crate::gateway::{FieldKind, OutputShape};
use crate::knowledge_tree::{PromptBundle, TreeError};
use crate::stage::{StageContext, StageError};
use crate::validate::StepFailure;

pub use associate::{associate_metadata, parse_date, AssociationContext, Found, Scope};
pub use coords::{find_coordinate_pairs, format_dms, parse_axis_value, parse_coordinate, Axis, CoordError, ParsedCoordinate};
pub use depth::{find_depths_in_prose, parse_depth, parse_depth_cell, DepthError, ParsedDepth};
pub use record::{flags, MeasurementType, PbRecord, Phase, Provenance, SourceKind};

/// Tree node whose knowledge drives extraction for a table category.
pub fn extraction_node(category: TableCategory) -> Option<&'static str> {
    match category {
        TableCategory::TargetPbConc => Some("pb_conc_extraction"),
        TableCategory::Target210Pb => Some("pb210_extraction"),
        TableCategory::TargetIsotopeRatios => Some("isotope_ratio_extraction"),
        TableCategory::NonTarget | TableCategory::Unclassified => None,
    }
}

/// One Pb-bearing column as identified by the backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub column: usize,
    pub measurement_type: MeasurementType,
    pub unit: String,
    #[serde(default)]
    pub phase: Phase,
}

/// A value cell that produced no record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub paper_id: String,
    pub table_id: String,
    pub row_index: usize,
    pub column_header: String,
    pub cell: String,
    pub flag: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TableDrafts {
    pub columns: Vec<ColumnSpec>,
    pub records: Vec<PbRecord>,
    pub skipped: Vec<SkippedCell>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Number(f64),
    BelowDetection,
    NonNumeric,
}

static NUMBER: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)\s*(?:(?:±|\+/-).*|\([^)]*\))?\s*[a-z*†‡]?$")
        .expect("number regex")
});
const BDL_TOKENS: [&str; 8] = ["n.d.", "nd", "n.d", "bdl", "b.d.l.", "<dl", "<lod", "below dl"];

/// Reads a value cell. Below-detection markers ("<0.5", "n.d.", "bdl") are
/// distinguished from other non-numeric text.
pub fn parse_value_cell(cell: &str) -> CellValue {
    let t = cell.trim().replace('−', "-");
    let lower = t.to_lowercase();
    if t.starts_with('<') || t.starts_with('≤') || t.starts_with('＜') || BDL_TOKENS.contains(&lower.as_str()) {
        return CellValue::BelowDetection;
    }
    match NUMBER.captures(&t).and_then(|c| c[1].parse::<f64>().ok()) {
        Some(v) if v.is_finite() => CellValue::Number(v),
        _ => CellValue::NonNumeric,
    }
}

pub fn record_id(paper_id: &str, table_id: &str, row: usize, column: usize) -> String {
    format!("{paper_id}/{table_id}/r{row:03}/c{column}")
}

/// Fans the identified columns out over the data rows: one draft per numeric
/// cell, one skip entry per other cell.
pub fn drafts_from_columns(paper: &ParsedPaper, table: &TableBlock, columns: &[ColumnSpec]) -> TableDrafts {
    let headers = table.column_headers();
    let mut out = TableDrafts { columns: columns.to_vec(), ..Default::default() };
    for (row_index, row) in table.data_rows.iter().enumerate() {
        for spec in columns {
            let cell = row.get(spec.column).map(String::as_str).unwrap_or("");
            let header = headers.get(spec.column).cloned().unwrap_or_default();
            let flag = match parse_value_cell(cell) {
                CellValue::Number(value) => {
                    out.records.push(PbRecord {
                        record_id: record_id(&paper.paper_id, &table.table_id, row_index, spec.column),
                        measurement_type: spec.measurement_type,
                        value,
                        unit: spec.unit.clone(),
                        latitude: None,
                        longitude: None,
                        depth_m: None,
                        phase: spec.phase,
                        sample_date: None,
                        provenance: vec![Provenance {
                            source_kind: SourceKind::Extracted,
                            paper_id: paper.paper_id.clone(),
                            doi: paper.doi.clone(),
                            table_id: table.table_id.clone(),
                            row_index,
                            column_header: header,
                            source_uri: paper.source_uri.clone(),
                        }],
                        flags: Default::default(),
                    });
                    continue;
                }
                CellValue::BelowDetection => flags::BDL_SKIPPED,
                CellValue::NonNumeric => flags::NON_NUMERIC_CELL,
            };
            out.skipped.push(SkippedCell {
                paper_id: paper.paper_id.clone(),
                table_id: table.table_id.clone(),
                row_index,
                column_header: header,
                cell: cell.to_string(),
                flag: flag.to_string(),
            });
        }
    }
    out
}

fn column_shape() -> OutputShape {
    OutputShape::RecordList {
        key: "columns",
        item: vec![
            ("column", FieldKind::Number),
            ("measurement_type", FieldKind::String),
            ("unit", FieldKind::String),
        ],
    }
}

/// The extraction prompt for a table, built from the category's tree node.
pub fn extraction_prompt(
    paper: &ParsedPaper,
    table: &TableBlock,
    category: TableCategory,
    ctx: &StageContext<'_>,
) -> Result<PromptBundle, StageError> {
    let node = extraction_node(category).ok_or_else(|| TreeError::UnknownNode(format!("no extraction node for {category:?}")))?;
    ctx.prompt(node, &format!("Paper: {}\n{}", paper.title, table.render()))
}

/// One extraction attempt for a target table: the backend names the Pb
/// columns, then rows are fanned out locally. Column lists that point outside
/// the table or at types the category does not admit are invalid.
pub fn extract_table_records(
    paper: &ParsedPaper,
    table: &TableBlock,
    category: TableCategory,
    ctx: &StageContext<'_>,
    attempt: u32,
) -> Result<TableDrafts, StepFailure<TableDrafts>> {
    let bundle = extraction_prompt(paper, table, category, ctx).map_err(|e| StepFailure::Unparseable(e.to_string()))?;
    let tag = format!("extract_table|{}/{}", paper.paper_id, table.table_id);
    let reply = ctx.ask::<TableDrafts>(&bundle, &tag, attempt, 1024, &column_shape())?;

    let mut columns = Vec::new();
    for item in reply["columns"].as_array().into_iter().flatten() {
        let column = item["column"].as_u64().ok_or_else(|| StepFailure::Unparseable("column index is not an integer".into()))?;
        let mtype: MeasurementType =
            item["measurement_type"].as_str().unwrap_or_default().parse().map_err(StepFailure::Unparseable)?;
        let phase: Phase = item.get("phase").and_then(|p| p.as_str()).unwrap_or("unknown").parse().unwrap_or_default();
        columns.push(ColumnSpec { column: column as usize, measurement_type: mtype, unit: item["unit"].as_str().unwrap_or_default().trim().to_string(), phase });
    }
    let width = table.width();
    let problem = if columns.is_empty() {
        Some("no Pb columns identified in a target table".to_string())
    } else if let Some(c) = columns.iter().find(|c| c.column >= width) {
        Some(format!("column {} outside a {width}-column table", c.column))
    } else if let Some(c) = columns.iter().find(|c| !category.admits(c.measurement_type)) {
        Some(format!("{} is not admitted by {category:?}", c.measurement_type))
    } else if let Some(c) = columns.iter().find(|c| c.unit.is_empty()) {
        Some(format!("column {} has no unit", c.column))
    } else {
        let mut idx: Vec<usize> = columns.iter().map(|c| c.column).collect();
        idx.sort_unstable();
        idx.dedup();
        (idx.len() != columns.len()).then(|| "a column is listed twice".to_string())
    };
    if let Some(reason) = problem {
        return Err(StepFailure::Invalid { partial: TableDrafts { columns, ..Default::default() }, reason });
    }
    Ok(drafts_from_columns(paper, table, &columns))
}
