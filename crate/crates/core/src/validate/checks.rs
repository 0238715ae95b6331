use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::extract::MeasurementType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Fatal,
    Flag,
}

/// An executable validation rule carried by a knowledge-tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub check_id: String,
    pub severity: Severity,
    pub kind: CheckKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CheckKind {
    Range { mtype: MeasurementType, min: f64, max: f64, unit: String },
    GeoBounds { mask_ref: String },
    UnitWhitelist { mtype: MeasurementType, allowed_units: Vec<String> },
    RequiredFields { fields: Vec<String> },
    CoordinateSanity,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Range { .. } => "range",
            CheckKind::GeoBounds { .. } => "geo_bounds",
            CheckKind::UnitWhitelist { .. } => "unit_whitelist",
            CheckKind::RequiredFields { .. } => "required_fields",
            CheckKind::CoordinateSanity => "coordinate_sanity",
        }
    }

    /// Measurement type this check is restricted to, if any.
    pub fn applies_to(&self) -> Option<MeasurementType> {
        match self {
            CheckKind::Range { mtype, .. } | CheckKind::UnitWhitelist { mtype, .. } => Some(*mtype),
            _ => None,
        }
    }
}

pub const KNOWN_FIELDS: &[&str] = &[
    "measurement_type",
    "value",
    "unit",
    "latitude",
    "longitude",
    "depth_m",
    "phase",
    "sample_date",
    "provenance",
];

fn str_param<'a>(params: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    params
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string parameter `{key}`"))
}

fn num_param(params: &Map<String, Value>, key: &str) -> Result<f64, String> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("missing numeric parameter `{key}`"))
}

fn list_param(params: &Map<String, Value>, key: &str) -> Result<Vec<String>, String> {
    let list = params
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("missing list parameter `{key}`"))?;
    list.iter()
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| format!("non-string entry in `{key}`")))
        .collect()
}

fn mtype_param(params: &Map<String, Value>) -> Result<MeasurementType, String> {
    str_param(params, "mtype")?.parse()
}

impl CheckSpec {
    /// Parses the tree-file form `{kind, id, severity?, params}`.
    pub fn from_document(doc: &Value) -> Result<CheckSpec, String> {
        let obj = doc.as_object().ok_or("check must be an object")?;
        let kind_name = obj.get("kind").and_then(Value::as_str).ok_or("check without `kind`")?;
        let check_id = obj
            .get("id")
            .and_then(Value::as_str)
            .filter(|s| !s.trim().is_empty())
            .ok_or("check without `id`")?
            .to_string();
        let severity = match obj.get("severity").and_then(Value::as_str).unwrap_or("fatal") {
            "fatal" => Severity::Fatal,
            "flag" => Severity::Flag,
            other => return Err(format!("unknown severity `{other}`")),
        };
        let empty = Map::new();
        let params = match obj.get("params") {
            Some(Value::Object(map)) => map,
            None | Some(Value::Null) => &empty,
            Some(_) => return Err("`params` must be an object".into()),
        };
        let kind = match kind_name {
            "range" => {
                let min = num_param(params, "min")?;
                let max = num_param(params, "max")?;
                if min >= max {
                    return Err(format!("range min {min} must be below max {max}"));
                }
                CheckKind::Range { mtype: mtype_param(params)?, min, max, unit: str_param(params, "unit")?.to_string() }
            }
            "geo_bounds" => CheckKind::GeoBounds { mask_ref: str_param(params, "mask_ref")?.to_string() },
            "unit_whitelist" => {
                let allowed_units = list_param(params, "allowed_units")?;
                if allowed_units.is_empty() {
                    return Err("empty unit whitelist".into());
                }
                CheckKind::UnitWhitelist { mtype: mtype_param(params)?, allowed_units }
            }
            "required_fields" => {
                let fields = list_param(params, "fields")?;
                if fields.is_empty() {
                    return Err("empty required field list".into());
                }
                if let Some(bad) = fields.iter().find(|f| !KNOWN_FIELDS.contains(&f.as_str())) {
                    return Err(format!("unknown field `{bad}`"));
                }
                CheckKind::RequiredFields { fields }
            }
            "coordinate_sanity" => CheckKind::CoordinateSanity,
            other => return Err(format!("unknown check kind `{other}`")),
        };
        Ok(CheckSpec { check_id, severity, kind })
    }

    pub fn to_document(&self) -> Value {
        let params = match &self.kind {
            CheckKind::Range { mtype, min, max, unit } => {
                json!({"mtype": mtype.as_str(), "min": min, "max": max, "unit": unit})
            }
            CheckKind::GeoBounds { mask_ref } => json!({ "mask_ref": mask_ref }),
            CheckKind::UnitWhitelist { mtype, allowed_units } => {
                json!({"mtype": mtype.as_str(), "allowed_units": allowed_units})
            }
            CheckKind::RequiredFields { fields } => json!({ "fields": fields }),
            CheckKind::CoordinateSanity => json!({}),
        };
        let severity = match self.severity {
            Severity::Fatal => "fatal",
            Severity::Flag => "flag",
        };
        json!({"kind": self.kind.name(), "id": self.check_id, "severity": severity, "params": params})
    }
}
