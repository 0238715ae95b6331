//! Binding draft values to positions, depths and dates.
//!
//! Each field is looked up scope by scope (row cell, footnote, caption,
//! sibling table, body text) and the nearest scope with exactly one candidate
//! wins. Labeled entries ("Station A: ...") are matched to the record's station
//! label when the table has one.

use chrono::NaiveDate;
use once_cell::sync::Lazy;
use regex::Regex;

use super::coords::{find_coordinate_pairs, parse_axis_value, Axis, CoordError};
use super::depth::{find_depths_in_prose, parse_depth_cell, ParsedDepth};
use super::record::{flags, PbRecord};
use crate::corpus::{ParsedPaper, TableBlock};
use crate::harmonize::{depth_unit_hint, negative_hemisphere_hint, rule_mapping, AliasTable, CanonicalField, HeaderMapping};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Row,
    Footnote,
    Caption,
    SiblingTable,
    Body,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Row => "row",
            Scope::Footnote => "footnote",
            Scope::Caption => "caption",
            Scope::SiblingTable => "sibling_table",
            Scope::Body => "body",
        }
    }
}

const CONTEXT_SCOPES: [Scope; 4] = [Scope::Footnote, Scope::Caption, Scope::SiblingTable, Scope::Body];

/// A candidate value and the text it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Found<T> {
    pub value: T,
    pub scope: Scope,
    pub station: Option<String>,
    pub origin: String,
}

impl<T> Found<T> {
    fn new(value: T, scope: Scope, station: &Option<String>, origin: &str) -> Self {
        Found { value, scope, station: station.clone(), origin: origin.to_string() }
    }
}

/// Everything outside the row cells that could locate a table's records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssociationContext {
    pub coordinates_found: Vec<Found<(f64, f64)>>,
    pub depths_found: Vec<Found<ParsedDepth>>,
    pub dates_found: Vec<Found<String>>,
}

static STATION: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)\b(?:station|stn\.?|site)\s+([A-Za-z0-9][A-Za-z0-9_-]*)").expect("station regex"));
static STATION_PREFIX: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)^(?:station|stn\.?|site)\s*").expect("prefix regex"));
static DATE_IN_TEXT: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?i)\b(\d{4}-\d{2}-\d{2}|\d{1,2}\s+(?:jan|feb|mar|apr|may|jun|jul|aug|sep|oct|nov|dec)[a-z]*\.?\s+\d{4})\b")
        .expect("date regex")
});

/// Normalized station key: "Station k1" and "K1" compare equal.
pub fn station_key(text: &str) -> Option<String> {
    let t = STATION_PREFIX.replace(text.trim(), "");
    let t = t.trim_matches(|c: char| c.is_whitespace() || c == ':' || c == ',' || c == '.');
    (!t.is_empty()).then(|| t.to_uppercase())
}

/// Reads a calendar date in a few common layouts and returns it as ISO-8601.
pub fn parse_date(text: &str) -> Option<String> {
    let t = text.trim().replace('.', "");
    const FORMATS: [&str; 8] = ["%Y-%m-%d", "%Y/%m/%d", "%d/%m/%Y", "%d %b %Y", "%d %B %Y", "%B %d, %Y", "%b %d, %Y", "%d-%b-%Y"];
    FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(&t, f).ok())
        .map(|d| d.format("%Y-%m-%d").to_string())
}

fn segments(text: &str) -> impl Iterator<Item = &str> {
    text.split(['\n', ';']).flat_map(|s| s.split(". ")).map(str::trim).filter(|s| !s.is_empty())
}

#[derive(Default, Clone, Copy)]
struct Columns {
    lat: Option<usize>,
    lon: Option<usize>,
    depth: Option<usize>,
    date: Option<usize>,
    station: Option<usize>,
}

impl Columns {
    fn from_mappings(mappings: &[HeaderMapping]) -> Self {
        let find = |field: CanonicalField| mappings.iter().position(|m| m.canonical_field == field);
        Columns {
            lat: find(CanonicalField::Latitude),
            lon: find(CanonicalField::Longitude),
            depth: find(CanonicalField::DepthM),
            date: find(CanonicalField::SampleDate),
            station: find(CanonicalField::StationLabel),
        }
    }
}

struct RowReader<'a> {
    headers: Vec<String>,
    cols: Columns,
    table: &'a TableBlock,
}

impl<'a> RowReader<'a> {
    fn new(table: &'a TableBlock, mappings: &[HeaderMapping]) -> Self {
        RowReader { headers: table.column_headers(), cols: Columns::from_mappings(mappings), table }
    }

    fn cell(&self, row: usize, col: Option<usize>) -> Option<&'a str> {
        let c = self.table.data_rows.get(row)?.get(col?)?.trim();
        (!c.is_empty()).then_some(c)
    }

    fn station(&self, row: usize) -> Option<String> {
        self.cell(row, self.cols.station).and_then(station_key)
    }

    fn axis(&self, row: usize, col: Option<usize>, axis: Axis) -> Result<Option<f64>, CoordError> {
        let Some(text) = self.cell(row, col) else { return Ok(None) };
        let hint = negative_hemisphere_hint(&self.headers[col.expect("cell implies column")]);
        parse_axis_value(text, axis, hint)
    }

    fn position(&self, row: usize) -> Result<Option<(f64, f64)>, CoordError> {
        let lat = self.axis(row, self.cols.lat, Axis::Latitude);
        let lon = self.axis(row, self.cols.lon, Axis::Longitude);
        match (lat, lon) {
            (Err(e @ CoordError::OutOfRange { .. }), _) | (_, Err(e @ CoordError::OutOfRange { .. })) => Err(e),
            (Ok(Some(a)), Ok(Some(b))) => Ok(Some((a, b))),
            _ => Ok(None),
        }
    }

    fn depth(&self, row: usize) -> Option<ParsedDepth> {
        let col = self.cols.depth?;
        let text = self.cell(row, Some(col))?;
        parse_depth_cell(text, depth_unit_hint(&self.headers[col])).ok().flatten()
    }

    fn date(&self, row: usize) -> Option<String> {
        self.cell(row, self.cols.date).and_then(parse_date)
    }
}

impl AssociationContext {
    /// Collects candidates from the table's footnotes and caption, the other
    /// tables of the paper (headers mapped by rules only) and the body text.
    pub fn build(table: &TableBlock, paper: &ParsedPaper, aliases: &AliasTable) -> Self {
        let mut ctx = AssociationContext::default();
        for note in &table.footnotes {
            ctx.scan_text(note, Scope::Footnote);
        }
        ctx.scan_text(&table.caption, Scope::Caption);
        for sibling in paper.tables.iter().filter(|t| t.table_id != table.table_id) {
            ctx.scan_sibling(sibling, aliases);
        }
        for snippet in &table.context_snippets {
            ctx.scan_text(snippet, Scope::Body);
        }
        for section in &paper.sections {
            ctx.scan_text(&section.body_text, Scope::Body);
        }
        ctx
    }

    fn scan_text(&mut self, text: &str, scope: Scope) {
        for seg in segments(text) {
            let station = STATION.captures(seg).and_then(|c| station_key(&c[1]));
            for pair in find_coordinate_pairs(seg) {
                push_unique(&mut self.coordinates_found, Found::new(pair, scope, &station, seg));
            }
            for depth in find_depths_in_prose(seg) {
                push_unique(&mut self.depths_found, Found::new(depth, scope, &station, seg));
            }
            for m in DATE_IN_TEXT.find_iter(seg) {
                if let Some(date) = parse_date(m.as_str()) {
                    push_unique(&mut self.dates_found, Found::new(date, scope, &station, seg));
                }
            }
        }
    }

    fn scan_sibling(&mut self, sibling: &TableBlock, aliases: &AliasTable) {
        let mappings: Vec<HeaderMapping> = sibling
            .column_headers()
            .iter()
            .map(|h| {
                rule_mapping(h, aliases).unwrap_or(HeaderMapping {
                    source_header: h.clone(),
                    canonical_field: CanonicalField::Ignore,
                    measurement_type: None,
                    confidence_note: String::new(),
                    unresolved: true,
                })
            })
            .collect();
        let reader = RowReader::new(sibling, &mappings);
        for row in 0..sibling.data_rows.len() {
            let station = reader.station(row);
            let origin = format!("{} row {row}: {}", sibling.table_id, sibling.data_rows[row].join(" | "));
            let scope = Scope::SiblingTable;
            if let Ok(Some(pos)) = reader.position(row) {
                push_unique(&mut self.coordinates_found, Found::new(pos, scope, &station, &origin));
            }
            if let Some(d) = reader.depth(row) {
                push_unique(&mut self.depths_found, Found::new(d, scope, &station, &origin));
            }
            if let Some(d) = reader.date(row) {
                push_unique(&mut self.dates_found, Found::new(d, scope, &station, &origin));
            }
        }
    }

    fn has_labels(&self) -> bool {
        self.coordinates_found.iter().any(|f| f.station.is_some())
    }

    fn knows_station(&self, station: &str) -> bool {
        self.coordinates_found.iter().any(|f| f.station.as_deref() == Some(station))
    }
}

fn push_unique<T: PartialEq>(list: &mut Vec<Found<T>>, f: Found<T>) {
    if !list.iter().any(|g| g.value == f.value && g.scope == f.scope && g.station == f.station) {
        list.push(f);
    }
}

enum Pick<'a, T> {
    Nothing,
    One(&'a Found<T>),
    Ambiguous,
}

fn pick<'a, T: PartialEq>(entries: &'a [Found<T>], scope: Scope, station: Option<&str>) -> Pick<'a, T> {
    let at: Vec<&Found<T>> = entries.iter().filter(|f| f.scope == scope).collect();
    let pool: Vec<&Found<T>> = match station {
        Some(s) => {
            let matched: Vec<_> = at.iter().copied().filter(|f| f.station.as_deref() == Some(s)).collect();
            if matched.is_empty() {
                at.into_iter().filter(|f| f.station.is_none()).collect()
            } else {
                matched
            }
        }
        None => at,
    };
    let mut distinct: Vec<&Found<T>> = Vec::new();
    for f in pool {
        if !distinct.iter().any(|d| d.value == f.value) {
            distinct.push(f);
        }
    }
    match distinct.len() {
        0 => Pick::Nothing,
        1 => Pick::One(distinct[0]),
        _ => Pick::Ambiguous,
    }
}

/// Walks the context scopes in order; returns the first unique candidate, or
/// `Err(())` when the first non-empty scope is ambiguous.
fn resolve<'a, T: PartialEq>(entries: &'a [Found<T>], station: Option<&str>) -> Result<Option<&'a Found<T>>, ()> {
    for scope in CONTEXT_SCOPES {
        match pick(entries, scope, station) {
            Pick::Nothing => continue,
            Pick::One(f) => return Ok(Some(f)),
            Pick::Ambiguous => return Err(()),
        }
    }
    Ok(None)
}

/// Fills position, depth and date on drafts from one table. Fields already
/// set are kept. Drafts left without a valid position are flagged `unlocated`.
pub fn associate_metadata(
    drafts: Vec<PbRecord>,
    table: &TableBlock,
    paper: &ParsedPaper,
    mappings: &[HeaderMapping],
    aliases: &AliasTable,
) -> Vec<PbRecord> {
    let ctx = AssociationContext::build(table, paper, aliases);
    let reader = RowReader::new(table, mappings);
    drafts.into_iter().map(|rec| associate_one(rec, &reader, &ctx)).collect()
}

fn associate_one(mut rec: PbRecord, reader: &RowReader<'_>, ctx: &AssociationContext) -> PbRecord {
    let row = rec.source().row_index;
    let station = reader.station(row);
    let station = station.as_deref();

    if rec.latitude.is_none() && rec.longitude.is_none() {
        match reader.position(row) {
            Ok(Some((lat, lon))) => {
                (rec.latitude, rec.longitude) = (Some(lat), Some(lon));
                rec.flag(format!("coord_from_{}", Scope::Row.as_str()));
            }
            Err(_) => rec.flag(flags::COORD_OUT_OF_RANGE),
            Ok(None) => match resolve(&ctx.coordinates_found, station) {
                Ok(Some(f)) => {
                    (rec.latitude, rec.longitude) = (Some(f.value.0), Some(f.value.1));
                    rec.flag(format!("coord_from_{}", f.scope.as_str()));
                }
                Ok(None) => {}
                Err(()) => rec.flag(flags::COORD_AMBIGUOUS),
            },
        }
    }

    if rec.depth_m.is_none() {
        let depth = match reader.depth(row) {
            Some(d) => Some((d, Scope::Row)),
            None => match resolve(&ctx.depths_found, station) {
                Ok(found) => found.map(|f| (f.value, f.scope)),
                Err(()) => {
                    rec.flag(flags::DEPTH_AMBIGUOUS);
                    None
                }
            },
        };
        if let Some((d, scope)) = depth {
            rec.depth_m = Some(d.meters);
            rec.flag(format!("depth_from_{}", scope.as_str()));
            if d.surface {
                rec.flag(flags::DEPTH_SURFACE_CONVENTION);
            }
        }
    }

    if rec.sample_date.is_none() {
        let date = match reader.date(row) {
            Some(d) => Some((d, Scope::Row)),
            None => match resolve(&ctx.dates_found, station) {
                Ok(found) => found.map(|f| (f.value.clone(), f.scope)),
                Err(()) => {
                    rec.flag(flags::DATE_AMBIGUOUS);
                    None
                }
            },
        };
        if let Some((d, scope)) = date {
            rec.sample_date = Some(d);
            rec.flag(format!("date_from_{}", scope.as_str()));
        }
    }

    if !rec.is_located() {
        rec.flag(flags::UNLOCATED);
        if let Some(s) = station {
            if ctx.has_labels() && !ctx.knows_station(s) {
                rec.flag(flags::STATION_UNMATCHED);
            }
        }
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Section;
    use crate::extract::{drafts_from_columns, ColumnSpec, MeasurementType, Phase};

    fn table(id: &str, headers: &[&str], rows: &[&[&str]], caption: &str, footnotes: &[&str]) -> TableBlock {
        TableBlock {
            table_id: id.into(),
            caption: caption.into(),
            header_rows: vec![headers.iter().map(|h| h.to_string()).collect()],
            data_rows: rows.iter().map(|r| r.iter().map(|c| c.to_string()).collect()).collect(),
            footnotes: footnotes.iter().map(|f| f.to_string()).collect(),
            context_snippets: vec![],
            anomalies: vec![],
        }
    }

    fn paper(tables: Vec<TableBlock>, body: &str) -> ParsedPaper {
        ParsedPaper {
            paper_id: "P".into(),
            doi: None,
            title: "t".into(),
            abstract_text: String::new(),
            sections: vec![Section { heading: "Methods".into(), body_text: body.into() }],
            tables,
            source_uri: "file://P".into(),
        }
    }

    fn run(p: &ParsedPaper, table_id: &str, value_col: usize) -> Vec<PbRecord> {
        let t = p.table(table_id).unwrap();
        let spec = ColumnSpec { column: value_col, measurement_type: MeasurementType::PbConc, unit: "pmol/kg".into(), phase: Phase::Dissolved };
        let drafts = drafts_from_columns(p, t, &[spec]).records;
        let aliases = AliasTable::bundled();
        let mappings: Vec<HeaderMapping> = t.column_headers().iter().map(|h| rule_mapping(h, aliases).unwrap()).collect();
        associate_metadata(drafts, t, p, &mappings, aliases)
    }

    #[test]
    fn footnote_coordinates_and_caption_depth() {
        let t = table("T1", &["Sample", "Pb"], &[&["1", "20.1"], &["2", "21.3"]], "Dissolved Pb at 2000 m depth", &["Station A: 49°30'N, 127°00'W"]);
        let p = paper(vec![t], "");
        let recs = run(&p, "T1", 1);
        for r in &recs {
            assert_eq!((r.latitude, r.longitude), (Some(49.5), Some(-127.0)));
            assert_eq!(r.depth_m, Some(2000.0));
            assert!(r.has_flag("coord_from_footnote"));
            assert!(r.has_flag("depth_from_caption"));
            assert!(!r.has_flag(flags::UNLOCATED));
        }
    }

    #[test]
    fn two_stations_without_row_key_are_ambiguous() {
        let t = table("T1", &["Sample", "Pb"], &[&["1", "20.1"]], "", &["Station A: 49°30'N, 127°00'W", "Station B: 50°N, 130°W"]);
        let p = paper(vec![t], "");
        let r = &run(&p, "T1", 1)[0];
        assert!(r.has_flag(flags::COORD_AMBIGUOUS));
        assert!(r.has_flag(flags::UNLOCATED));
        assert_eq!(r.latitude, None);
    }

    #[test]
    fn station_column_picks_labeled_footnote() {
        let t = table("T1", &["Station", "Pb"], &[&["A", "20.1"], &["B", "3.0"]], "", &["Station A: 49°30'N, 127°00'W; Station B: 50°N, 130°W"]);
        let p = paper(vec![t], "");
        let recs = run(&p, "T1", 1);
        assert_eq!(recs[0].latitude, Some(49.5));
        assert_eq!(recs[1].longitude, Some(-130.0));
    }

    #[test]
    fn sibling_table_by_station() {
        let stations = table("T1", &["Station", "Latitude (°N)", "Longitude (°E)"], &[&["K1", "30.0", "150.0"], &["K2", "31.5", "-152.25"]], "", &[]);
        let data = table("T2", &["Station", "Depth (m)", "Pb"], &[&["K2", "100", "12"], &["K9", "50", "13"]], "", &[]);
        let p = paper(vec![stations, data], "");
        let recs = run(&p, "T2", 2);
        assert_eq!((recs[0].latitude, recs[0].longitude), (Some(31.5), Some(-152.25)));
        assert!(recs[0].has_flag("coord_from_sibling_table"));
        assert_eq!(recs[0].depth_m, Some(100.0));
        assert!(recs[0].has_flag("depth_from_row"));
        assert!(recs[1].has_flag(flags::UNLOCATED));
        assert!(recs[1].has_flag(flags::STATION_UNMATCHED));
    }

    #[test]
    fn row_wins_over_footnote() {
        let t = table("T1", &["Lat", "Lon", "Pb"], &[&["10", "20", "5"], &["", "", "6"]], "", &["Station A: 49°30'N, 127°00'W"]);
        let p = paper(vec![t], "");
        let recs = run(&p, "T1", 2);
        assert_eq!(recs[0].latitude, Some(10.0));
        assert!(recs[0].has_flag("coord_from_row"));
        assert_eq!(recs[1].latitude, Some(49.5));
    }

    #[test]
    fn out_of_range_row_is_flagged_not_clamped() {
        let t = table("T1", &["Lat", "Lon", "Pb"], &[&["95", "20", "5"]], "", &["Station A: 49°30'N, 127°00'W"]);
        let p = paper(vec![t], "");
        let r = &run(&p, "T1", 2)[0];
        assert!(r.has_flag(flags::COORD_OUT_OF_RANGE));
        assert!(r.has_flag(flags::UNLOCATED));
        assert_eq!(r.latitude, None);
    }

    #[test]
    fn body_and_dates() {
        let t = table("T1", &["Sample", "Pb"], &[&["1", "5"]], "", &[]);
        let p = paper(vec![t], "Samples were collected on 12 March 2015 at 12.5°S, 77.25°W. Surface water was filtered.");
        let r = &run(&p, "T1", 1)[0];
        assert_eq!((r.latitude, r.longitude), (Some(-12.5), Some(-77.25)));
        assert!(r.has_flag("coord_from_body"));
        assert_eq!(r.sample_date.as_deref(), Some("2015-03-12"));
    }

    #[test]
    fn date_formats() {
        assert_eq!(parse_date("2015-03-12").as_deref(), Some("2015-03-12"));
        assert_eq!(parse_date("12 Mar. 2015").as_deref(), Some("2015-03-12"));
        assert_eq!(parse_date("March 12, 2015").as_deref(), Some("2015-03-12"));
        assert_eq!(parse_date("spring"), None);
        assert_eq!(station_key("Stn. k1"), Some("K1".into()));
    }
}
