//! 1°×1° ocean mask.
//!
//! File layout (UTF-8 text):
//!
//! ```text
//! OCEANMASK v1 res=1deg rows=180 cols=360 row0=90N col0=180W ocean=1 land=0
//! <180 lines of exactly 360 characters, each '1' (ocean) or '0' (land)>
//! ```
//!
//! Row `r` covers latitudes `[90 - r - 1, 90 - r]`, column `c` covers longitudes
//! `[-180 + c, -180 + c + 1]`. A point on a shared edge belongs to the cell to its
//! south / east; latitude 90 and -90 clamp into the first / last row and longitude
//! 180 wraps to column 0.

use thiserror::Error;

pub const ROWS: usize = 180;
pub const COLS: usize = 360;
const HEADER_PREFIX: &str = "OCEANMASK v1";

static BUNDLED: &str = include_str!("../../data/ocean_mask_1deg.txt");

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask header missing or unsupported")]
    BadHeader,
    #[error("mask row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("mask has {0} rows, expected 180")]
    RowCount(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OceanMask {
    cells: Vec<bool>,
    pub resolution_note: String,
    pub source_note: String,
}

impl OceanMask {
    pub fn bundled() -> OceanMask {
        let mut mask = OceanMask::parse(BUNDLED).expect("bundled ocean mask is well-formed");
        mask.source_note = "global-land-mask (GLOBE 1 km), cell is ocean if any of 5x5 samples is ocean".into();
        mask
    }

    pub fn parse(text: &str) -> Result<OceanMask, MaskError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(MaskError::BadHeader)?;
        if !header.starts_with(HEADER_PREFIX) {
            return Err(MaskError::BadHeader);
        }
        let mut cells = Vec::with_capacity(ROWS * COLS);
        let mut rows = 0;
        for (row, line) in lines.filter(|l| !l.is_empty()).enumerate() {
            if line.len() != COLS {
                return Err(MaskError::BadRow { row, reason: format!("{} columns", line.len()) });
            }
            for ch in line.chars() {
                match ch {
                    '1' => cells.push(true),
                    '0' => cells.push(false),
                    other => return Err(MaskError::BadRow { row, reason: format!("unexpected `{other}`") }),
                }
            }
            rows += 1;
        }
        if rows != ROWS {
            return Err(MaskError::RowCount(rows));
        }
        Ok(OceanMask { cells, resolution_note: "1 degree".into(), source_note: String::new() })
    }

    /// A mask where every cell has the same value; handy for tests.
    pub fn uniform(ocean: bool) -> OceanMask {
        OceanMask { cells: vec![ocean; ROWS * COLS], resolution_note: "1 degree".into(), source_note: "uniform".into() }
    }

    pub fn cell_index(latitude: f64, longitude: f64) -> (usize, usize) {
        let row = (90.0 - latitude).floor().clamp(0.0, (ROWS - 1) as f64) as usize;
        let col = ((longitude + 180.0).floor() as i64).rem_euclid(COLS as i64) as usize;
        (row, col)
    }

    pub fn is_ocean(&self, latitude: f64, longitude: f64) -> bool {
        let (row, col) = Self::cell_index(latitude, longitude);
        self.cells[row * COLS + col]
    }

    pub fn ocean_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| **c).count() as f64 / self.cells.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_mask_known_cells() {
        let mask = OceanMask::bundled();
        assert!(mask.is_ocean(40.0, -30.0), "mid-Atlantic");
        assert!(!mask.is_ocean(47.0, 2.5), "central France");
        assert!(mask.is_ocean(0.0, -140.0), "equatorial Pacific");
        assert!(!mask.is_ocean(-25.0, 135.0), "central Australia");
        let frac = mask.ocean_fraction();
        assert!(frac > 0.6 && frac < 0.8, "{frac}");
    }

    #[test]
    fn poles_and_antimeridian() {
        assert_eq!(OceanMask::cell_index(90.0, 0.0), (0, 180));
        assert_eq!(OceanMask::cell_index(-90.0, 0.0), (179, 180));
        assert_eq!(OceanMask::cell_index(0.0, 180.0), (90, 0));
        assert_eq!(OceanMask::cell_index(0.0, -180.0), (90, 0));
        assert_eq!(OceanMask::cell_index(47.0, 2.5), (43, 182));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(OceanMask::parse("nope\n"), Err(MaskError::BadHeader)));
        let short = format!("{HEADER_PREFIX}\n{}\n", "1".repeat(COLS));
        assert!(matches!(OceanMask::parse(&short), Err(MaskError::RowCount(1))));
    }
}
