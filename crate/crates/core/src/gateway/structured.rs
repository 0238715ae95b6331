use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    String,
    Number,
    Array,
    Object,
    /// String or null.
    OptionalString,
}

impl FieldKind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            FieldKind::String => v.is_string(),
            FieldKind::Number => v.is_number(),
            FieldKind::Array => v.is_array(),
            FieldKind::Object => v.is_object(),
            FieldKind::OptionalString => v.is_string() || v.is_null(),
        }
    }
}

/// Shape a stage expects back from the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputShape {
    /// `{"label": string, ...}`
    Label,
    /// An object with the listed fields.
    Mapping(Vec<(&'static str, FieldKind)>),
    /// `{"<key>": [ {fields...}, ... ]}`
    RecordList { key: &'static str, item: Vec<(&'static str, FieldKind)> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructuredError {
    #[error("unparseable output: {0}")]
    UnparseableOutput(String),
    #[error("output is missing or mistypes fields {0:?}")]
    SchemaMismatch(Vec<String>),
}

fn strip_fences(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    Some(body[..end].trim())
}

fn strip_prose(text: &str) -> Option<&str> {
    let open = text.find(['{', '['])?;
    let close_char = if text[open..].starts_with('{') { '}' } else { ']' };
    let close = text.rfind(close_char)?;
    (close > open).then(|| &text[open..=close])
}

/// One repair pass: code fences, then surrounding prose.
fn repair(text: &str) -> Result<Value, StructuredError> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let inner = strip_fences(trimmed).unwrap_or(trimmed);
    if let Ok(v) = serde_json::from_str::<Value>(inner) {
        return Ok(v);
    }
    let candidate = strip_prose(inner).ok_or_else(|| StructuredError::UnparseableOutput(preview(text)))?;
    serde_json::from_str(candidate).map_err(|_| StructuredError::UnparseableOutput(preview(text)))
}

fn preview(text: &str) -> String {
    text.chars().take(80).collect()
}

fn missing_fields(obj: &Value, fields: &[(&'static str, FieldKind)], prefix: &str) -> Vec<String> {
    fields
        .iter()
        .filter(|(name, kind)| match obj.get(*name) {
            Some(v) => !kind.accepts(v),
            None => *kind != FieldKind::OptionalString,
        })
        .map(|(name, _)| format!("{prefix}{name}"))
        .collect()
}

/// Extracts and validates the JSON body of a model reply.
pub fn parse_structured(text: &str, shape: &OutputShape) -> Result<Value, StructuredError> {
    let value = repair(text)?;
    let missing = match shape {
        OutputShape::Label => {
            if !value.is_object() {
                return Err(StructuredError::SchemaMismatch(vec!["label".into()]));
            }
            missing_fields(&value, &[("label", FieldKind::String)], "")
        }
        OutputShape::Mapping(fields) => {
            if !value.is_object() {
                return Err(StructuredError::SchemaMismatch(fields.iter().map(|(n, _)| n.to_string()).collect()));
            }
            missing_fields(&value, fields, "")
        }
        OutputShape::RecordList { key, item } => match value.get(*key).and_then(Value::as_array) {
            None => vec![key.to_string()],
            Some(items) => items
                .iter()
                .enumerate()
                .flat_map(|(i, it)| missing_fields(it, item, &format!("{key}[{i}].")))
                .collect(),
        },
    };
    if missing.is_empty() {
        Ok(value)
    } else {
        Err(StructuredError::SchemaMismatch(missing))
    }
}
