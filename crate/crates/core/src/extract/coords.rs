//! Coordinate parsing for the formats found in table cells, footnotes and captions:
//! signed decimal degrees, decimal degrees with hemisphere letters, degrees-minutes
//! and degrees-minutes-seconds.

use once_cell::sync::Lazy;
use regex::{Captures, Regex};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Latitude,
    Longitude,
}

impl Axis {
    fn limit(self) -> f64 {
        match self {
            Axis::Latitude => 90.0,
            Axis::Longitude => 180.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoordError {
    #[error("{axis:?} magnitude {value} is out of range")]
    OutOfRange { axis: Axis, value: f64 },
    #[error("malformed coordinate `{0}`")]
    Malformed(String),
}

/// Latitude and longitude found in a piece of text; either may be absent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParsedCoordinate {
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

static COMPONENT: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r#"(?x)
        (?:\b(?P<pre>[NSEW])\s*)?
        (?P<sign>[-−+])?
        (?P<deg>\d+(?:\.\d+)?)
        \s*(?P<dmark>°|º|˚|\bdeg\b)?\s*
        (?:
            (?P<min>\d+(?:\.\d+)?)\s*(?:'|′|’)
            \s*(?:(?P<sec>\d+(?:\.\d+)?)\s*(?:"|″|”|''))?
        )?
        \s*(?:(?P<post>[NSEW])(?:[^A-Za-z]|$))?
        "#,
    )
    .expect("coordinate regex")
});

static BARE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^\s*[-−+]?\d+(?:\.\d+)?(?:\s*[,;/\s]\s*[-−+]?\d+(?:\.\d+)?)?\s*$").expect("bare regex")
});

#[derive(Debug, Clone, Copy)]
struct Component {
    magnitude: f64,
    negative: bool,
    axis: Option<Axis>,
}

impl Component {
    fn value(self) -> f64 {
        if self.negative {
            -self.magnitude
        } else {
            self.magnitude
        }
    }
}

fn hemisphere(letter: &str) -> (Axis, bool) {
    match letter {
        "N" => (Axis::Latitude, false),
        "S" => (Axis::Latitude, true),
        "E" => (Axis::Longitude, false),
        _ => (Axis::Longitude, true),
    }
}

fn number(caps: &Captures<'_>, name: &str) -> Option<f64> {
    caps.name(name).and_then(|m| m.as_str().parse::<f64>().ok())
}

/// Scans `text` for coordinate components. With `allow_bare` a component needs
/// no degree marker or hemisphere letter.
fn components(text: &str, allow_bare: bool) -> Result<Vec<Component>, CoordError> {
    let mut out = Vec::new();
    for caps in COMPONENT.captures_iter(text) {
        let deg_match = caps.name("deg").expect("deg group is mandatory");
        if caps.name("pre").is_none() && caps.name("sign").is_none() {
            // digits glued to a word or a fraction (e.g. "206Pb/207Pb") are not coordinates
            if let Some(prev) = text[..deg_match.start()].chars().next_back() {
                if prev.is_alphanumeric() || prev == '.' || prev == '/' || prev == '^' || prev == '{' {
                    continue;
                }
            }
        }
        let pre = caps.name("pre").map(|m| m.as_str());
        let post = caps.name("post").map(|m| m.as_str());
        let marked = caps.name("dmark").is_some() || caps.name("min").is_some();
        if !(marked || pre.is_some() || post.is_some() || allow_bare) {
            continue;
        }
        if pre.is_some() && post.is_some() {
            return Err(CoordError::Malformed(caps[0].trim().to_string()));
        }
        let degrees = number(&caps, "deg").ok_or_else(|| CoordError::Malformed(caps[0].to_string()))?;
        let minutes = number(&caps, "min").unwrap_or(0.0);
        let seconds = number(&caps, "sec").unwrap_or(0.0);
        if minutes >= 60.0 || seconds >= 60.0 {
            return Err(CoordError::Malformed(caps[0].trim().to_string()));
        }
        if (caps.name("min").is_some()) && degrees.fract() != 0.0 {
            return Err(CoordError::Malformed(caps[0].trim().to_string()));
        }
        let magnitude = (degrees * 3600.0 + minutes * 60.0 + seconds) / 3600.0;
        let signed = matches!(caps.name("sign").map(|m| m.as_str()), Some("-") | Some("−"));
        let (axis, hemi_negative) = match pre.or(post) {
            Some(letter) => {
                let (axis, neg) = hemisphere(letter);
                (Some(axis), neg)
            }
            None => (None, false),
        };
        out.push(Component {
            magnitude,
            negative: signed || hemi_negative,
            axis,
        });
    }
    Ok(out)
}

fn check_range(axis: Axis, value: f64) -> Result<f64, CoordError> {
    if value.abs() > axis.limit() || !value.is_finite() {
        Err(CoordError::OutOfRange { axis, value })
    } else {
        Ok(value)
    }
}

/// Parses a coordinate string.
///
/// Components without a hemisphere letter are read in latitude, longitude
/// order, so a lone unlettered value is a latitude. Text with no coordinate
/// yields an empty result.
pub fn parse_coordinate(text: &str) -> Result<ParsedCoordinate, CoordError> {
    let allow_bare = BARE.is_match(text);
    let comps = components(text, allow_bare)?;
    let mut parsed = ParsedCoordinate::default();
    let mut unassigned = Vec::new();
    for comp in comps {
        match comp.axis {
            Some(Axis::Latitude) if parsed.latitude.is_none() => {
                parsed.latitude = Some(check_range(Axis::Latitude, comp.value())?)
            }
            Some(Axis::Longitude) if parsed.longitude.is_none() => {
                parsed.longitude = Some(check_range(Axis::Longitude, comp.value())?)
            }
            Some(_) => {}
            None => unassigned.push(comp),
        }
    }
    for comp in unassigned {
        if parsed.latitude.is_none() {
            parsed.latitude = Some(check_range(Axis::Latitude, comp.value())?);
        } else if parsed.longitude.is_none() {
            parsed.longitude = Some(check_range(Axis::Longitude, comp.value())?);
        }
    }
    Ok(parsed)
}

/// Parses a single-axis cell, such as a value in a "Latitude" column.
///
/// `negate_unsigned` applies a header hemisphere hint like "(°S)" to values that
/// carry neither a sign nor a hemisphere letter.
pub fn parse_axis_value(text: &str, axis: Axis, negate_unsigned: bool) -> Result<Option<f64>, CoordError> {
    let allow_bare = BARE.is_match(text);
    let comps = components(text, allow_bare)?;
    let Some(comp) = comps.first().copied() else {
        return Ok(None);
    };
    if comps.len() > 1 {
        return Err(CoordError::Malformed(text.trim().to_string()));
    }
    match comp.axis {
        Some(found) if found != axis => Err(CoordError::Malformed(text.trim().to_string())),
        Some(_) => check_range(axis, comp.value()).map(Some),
        None => {
            let value = if negate_unsigned && !comp.negative { -comp.magnitude } else { comp.value() };
            check_range(axis, value).map(Some)
        }
    }
}

/// Every (latitude, longitude) pair in free text, in order of appearance.
/// Only components carrying a degree marker or hemisphere letter are considered;
/// out-of-range components are dropped.
pub fn find_coordinate_pairs(text: &str) -> Vec<(f64, f64)> {
    let Ok(comps) = components(text, false) else {
        return Vec::new();
    };
    let mut pairs = Vec::new();
    let mut pending: Option<(Axis, f64)> = None;
    for comp in comps {
        let axis = match comp.axis {
            Some(a) => a,
            None => match pending {
                Some((Axis::Latitude, _)) => Axis::Longitude,
                _ => Axis::Latitude,
            },
        };
        let Ok(value) = check_range(axis, comp.value()) else {
            pending = None;
            continue;
        };
        match (pending, axis) {
            (Some((Axis::Latitude, lat)), Axis::Longitude) => {
                pairs.push((lat, value));
                pending = None;
            }
            (Some((Axis::Longitude, lon)), Axis::Latitude) => {
                pairs.push((value, lon));
                pending = None;
            }
            _ => pending = Some((axis, value)),
        }
    }
    pairs
}

/// Formats a position as degrees-minutes-seconds with hemisphere letters,
/// keeping six decimals of arc-seconds.
pub fn format_dms(latitude: f64, longitude: f64) -> String {
    format!(
        "{} {}",
        format_component(latitude, 'N', 'S'),
        format_component(longitude, 'E', 'W')
    )
}

fn format_component(value: f64, positive: char, negative: char) -> String {
    let hemi = if value < 0.0 { negative } else { positive };
    let micro_arcsec = (value.abs() * 3_600_000_000.0).round() as u64;
    let degrees = micro_arcsec / 3_600_000_000;
    let rem = micro_arcsec % 3_600_000_000;
    let minutes = rem / 60_000_000;
    let micro = rem % 60_000_000;
    format!(
        "{}°{}'{}.{:06}\"{}",
        degrees,
        minutes,
        micro / 1_000_000,
        micro % 1_000_000,
        hemi
    )
}
