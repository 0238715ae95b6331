use once_cell::sync::Lazy;
use regex::Regex;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DepthError {
    #[error("negative depth {0} m")]
    NegativeDepth(f64),
}

/// Depth read from text; `surface` is set when the surface-equals-zero convention applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsedDepth {
    pub meters: f64,
    pub surface: bool,
}

static WITH_UNIT: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)(?:^|[^\w.])(-?\d+(?:\.\d+)?)\s*(km|m)\b").expect("depth regex"));
static SURFACE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)\bsurf(?:ace\b|\.)").expect("surface regex"));
static BARE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\s*(-?\d+(?:\.\d+)?)\s*$").expect("bare regex"));
static IN_PROSE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?i)(?:depths?\s+(?:of\s+)?(\d+(?:\.\d+)?)\s*(km|m)\b|(\d+(?:\.\d+)?)\s*(km|m)\s+depth)")
        .expect("prose depth regex")
});

fn to_meters(value: f64, unit: &str) -> Result<f64, DepthError> {
    let meters = if unit.eq_ignore_ascii_case("km") { value * 1000.0 } else { value };
    if meters < 0.0 {
        Err(DepthError::NegativeDepth(meters))
    } else {
        Ok(meters)
    }
}

/// Parses a depth such as `2000 m`, `2 km` or `surface`. Returns `None` when
/// the text carries no depth.
pub fn parse_depth(text: &str) -> Result<Option<ParsedDepth>, DepthError> {
    if let Some(caps) = WITH_UNIT.captures(text) {
        let value: f64 = caps[1].parse().unwrap_or(f64::NAN);
        return Ok(Some(ParsedDepth { meters: to_meters(value, &caps[2])?, surface: false }));
    }
    if SURFACE.is_match(text) {
        return Ok(Some(ParsedDepth { meters: 0.0, surface: true }));
    }
    Ok(None)
}

/// Parses a depth cell in a column whose header already fixes the unit
/// (`depth_unit` is `m` or `km`); a bare number is read in that unit.
pub fn parse_depth_cell(text: &str, depth_unit: &str) -> Result<Option<ParsedDepth>, DepthError> {
    if let Some(caps) = BARE.captures(text) {
        let value: f64 = caps[1].parse().unwrap_or(f64::NAN);
        return Ok(Some(ParsedDepth { meters: to_meters(value, depth_unit)?, surface: false }));
    }
    parse_depth(text)
}

/// All depths stated in prose ("at 2000 m depth", "depths of 500 m"), plus the
/// surface convention when the prose speaks of surface water.
pub fn find_depths_in_prose(text: &str) -> Vec<ParsedDepth> {
    let mut out = Vec::new();
    for caps in IN_PROSE.captures_iter(text) {
        let (value, unit) = match (caps.get(1), caps.get(2), caps.get(3), caps.get(4)) {
            (Some(v), Some(u), _, _) | (_, _, Some(v), Some(u)) => (v.as_str(), u.as_str()),
            _ => continue,
        };
        if let Ok(meters) = to_meters(value.parse().unwrap_or(f64::NAN), unit) {
            out.push(ParsedDepth { meters, surface: false });
        }
    }
    if out.is_empty() && Regex::new(r"(?i)\bsurface (?:water|seawater|samples?)\b").expect("regex").is_match(text) {
        out.push(ParsedDepth { meters: 0.0, surface: true });
    }
    out
}
