//! Pre-parsed papers and keyword retrieval.

mod remote;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{RemoteError, RepositoryClient, REPO_KEY_ENV};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus root {path}: {reason}")]
    UnreadableRoot { path: String, reason: String },
}

pub const RAGGED_ROW: &str = "ragged_row_padded";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    #[serde(rename = "text")]
    pub body_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableBlock {
    pub table_id: String,
    #[serde(default)]
    pub caption: String,
    #[serde(rename = "headers")]
    pub header_rows: Vec<Vec<String>>,
    #[serde(rename = "rows", default)]
    pub data_rows: Vec<Vec<String>>,
    #[serde(default)]
    pub footnotes: Vec<String>,
    #[serde(rename = "context", default)]
    pub context_snippets: Vec<String>,
    /// Parse anomalies recorded at load, e.g. padded ragged rows.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anomalies: Vec<String>,
}

impl TableBlock {
    pub fn width(&self) -> usize {
        self.header_rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Pads every header and data row to a common width, flagging each padded row.
    pub fn normalize(&mut self) {
        let width = self
            .header_rows
            .iter()
            .chain(self.data_rows.iter())
            .map(Vec::len)
            .max()
            .unwrap_or(0);
        for (i, row) in self.header_rows.iter_mut().enumerate() {
            if row.len() < width {
                row.resize(width, String::new());
                self.anomalies.push(format!("{RAGGED_ROW}:header:{i}"));
            }
        }
        for (i, row) in self.data_rows.iter_mut().enumerate() {
            if row.len() < width {
                row.resize(width, String::new());
                self.anomalies.push(format!("{RAGGED_ROW}:row:{i}"));
            }
        }
    }

    pub fn is_rectangular(&self) -> bool {
        let width = self.width();
        self.header_rows.iter().chain(self.data_rows.iter()).all(|r| r.len() == width)
    }

    /// One header string per column, joining stacked header rows with a space.
    pub fn column_headers(&self) -> Vec<String> {
        (0..self.width())
            .map(|c| {
                self.header_rows
                    .iter()
                    .filter_map(|r| r.get(c))
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }

    /// Plain-text rendering used as prompt context.
    pub fn render(&self) -> String {
        let mut out = format!("Table {}\nCaption: {}\n", self.table_id, self.caption);
        let headers = self.column_headers();
        out.push_str("Columns: ");
        out.push_str(
            &headers.iter().enumerate().map(|(i, h)| format!("[{i}] {h}")).collect::<Vec<_>>().join(" | "),
        );
        out.push('\n');
        for row in &self.data_rows {
            out.push_str(&row.join(" | "));
            out.push('\n');
        }
        for note in &self.footnotes {
            out.push_str("Footnote: ");
            out.push_str(note);
            out.push('\n');
        }
        for snippet in &self.context_snippets {
            out.push_str("Cited in text: ");
            out.push_str(snippet);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedPaper {
    pub paper_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub sections: Vec<Section>,
    #[serde(default)]
    pub tables: Vec<TableBlock>,
    #[serde(default)]
    pub source_uri: String,
}

impl ParsedPaper {
    pub fn table(&self, table_id: &str) -> Option<&TableBlock> {
        self.tables.iter().find(|t| t.table_id == table_id)
    }

    /// Text shown to the paper classifier.
    pub fn classification_text(&self, full_text: bool) -> String {
        let mut out = format!("Title: {}\nAbstract: {}\n", self.title, self.abstract_text);
        if full_text {
            for s in &self.sections {
                out.push_str(&format!("Section {}: {}\n", s.heading, s.body_text));
            }
        }
        out
    }

    fn validate(&self) -> Result<(), String> {
        if self.paper_id.trim().is_empty() {
            return Err("empty paper_id".into());
        }
        let mut seen = HashSet::new();
        for t in &self.tables {
            if !seen.insert(t.table_id.as_str()) {
                return Err(format!("duplicate table id `{}`", t.table_id));
            }
            if t.header_rows.is_empty() {
                return Err(format!("table `{}` has no header row", t.table_id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub count: usize,
    pub load_warnings: Vec<String>,
}

/// Loaded papers keyed (and therefore iterated) by paper id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub papers: BTreeMap<String, ParsedPaper>,
    pub manifest: CorpusManifest,
}

/// Parses one corpus paper document, normalizing its tables.
pub fn parse_paper(text: &str, default_uri: &str) -> Result<ParsedPaper, String> {
    let mut paper: ParsedPaper = serde_json::from_str(text).map_err(|e| e.to_string())?;
    paper.validate()?;
    if paper.source_uri.is_empty() {
        paper.source_uri = default_uri.to_string();
    }
    for table in &mut paper.tables {
        table.normalize();
    }
    Ok(paper)
}

/// Loads every `*.json` paper file directly under `root`. Malformed files are
/// skipped with a warning.
pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let unreadable = |e: std::io::Error| CorpusError::UnreadableRoot {
        path: root.display().to_string(),
        reason: e.to_string(),
    };
    let mut paths: Vec<_> = std::fs::read_dir(root)
        .map_err(unreadable)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();

    let mut corpus = Corpus::default();
    for path in paths {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let parsed = std::fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_paper(&text, &format!("file://{name}")));
        match parsed {
            Ok(paper) if corpus.papers.contains_key(&paper.paper_id) => {
                corpus.manifest.load_warnings.push(format!("{name}: duplicate paper id `{}`", paper.paper_id));
            }
            Ok(paper) => {
                corpus.papers.insert(paper.paper_id.clone(), paper);
            }
            Err(reason) => {
                log::warn!("skipping {name}: {reason}");
                corpus.manifest.load_warnings.push(format!("{name}: {reason}"));
            }
        }
    }
    corpus.manifest.count = corpus.papers.len();
    Ok(corpus)
}

/// Lower-cased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Ids of papers whose title, abstract or section text contains any keyword as
/// whole tokens (case-insensitive). Multi-word keywords must match as a token run.
pub fn keyword_search(corpus: &Corpus, keywords: &[String]) -> Vec<String> {
    let needles: Vec<Vec<String>> = keywords.iter().map(|k| tokenize(k)).filter(|t| !t.is_empty()).collect();
    corpus
        .papers
        .values()
        .filter(|paper| {
            let mut fields = vec![tokenize(&paper.title), tokenize(&paper.abstract_text)];
            fields.extend(paper.sections.iter().map(|s| tokenize(&format!("{} {}", s.heading, s.body_text))));
            needles.iter().any(|n| fields.iter().any(|f| contains_sequence(f, n)))
        })
        .map(|p| p.paper_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper(id: &str, title: &str, body: &str) -> ParsedPaper {
        ParsedPaper {
            paper_id: id.into(),
            doi: None,
            title: title.into(),
            abstract_text: String::new(),
            sections: vec![Section { heading: "Intro".into(), body_text: body.into() }],
            tables: vec![],
            source_uri: String::new(),
        }
    }

    fn corpus(papers: Vec<ParsedPaper>) -> Corpus {
        let mut c = Corpus::default();
        for p in papers {
            c.papers.insert(p.paper_id.clone(), p);
        }
        c.manifest.count = c.papers.len();
        c
    }

    #[test]
    fn whole_token_matching() {
        let c = corpus(vec![
            paper("a", "Lead in tropical marine systems", ""),
            paper("b", "Synthesis of PbX2compound crystals", ""),
            paper("c", "Ocean chemistry", "the Pb content was low"),
        ]);
        assert_eq!(keyword_search(&c, &["lead".into()]), vec!["a"]);
        assert_eq!(keyword_search(&c, &["Pb".into()]), vec!["c"]);
        assert!(keyword_search(&c, &["plumbum".into()]).is_empty());
        assert_eq!(keyword_search(&c, &["tropical marine".into()]), vec!["a"]);
    }

    #[test]
    fn ragged_rows_are_padded_and_flagged() {
        let text = r#"{"paper_id":"p","title":"t","tables":[{"table_id":"T1","headers":[["a","b","c"]],"rows":[["1","2"],["1","2","3"]]}]}"#;
        let p = parse_paper(text, "x").unwrap();
        let t = &p.tables[0];
        assert!(t.is_rectangular());
        assert_eq!(t.data_rows[0], vec!["1", "2", ""]);
        assert_eq!(t.anomalies, vec![format!("{RAGGED_ROW}:row:0")]);
    }

    #[test]
    fn stacked_headers_join() {
        let t = TableBlock {
            table_id: "T".into(),
            caption: String::new(),
            header_rows: vec![vec!["Pb".into(), "Depth".into()], vec!["(pmol/kg)".into(), "".into()]],
            data_rows: vec![],
            footnotes: vec![],
            context_snippets: vec![],
            anomalies: vec![],
        };
        assert_eq!(t.column_headers(), vec!["Pb (pmol/kg)", "Depth"]);
    }

    #[test]
    fn duplicate_table_ids_rejected() {
        let text = r#"{"paper_id":"p","title":"t","tables":[{"table_id":"T1","headers":[["a"]]},{"table_id":"T1","headers":[["a"]]}]}"#;
        assert!(parse_paper(text, "x").is_err());
    }

    proptest! {
        #[test]
        fn search_is_monotone_in_keywords(
            k1 in proptest::collection::vec("(lead|pb|ocean|soil|marine|dust|zinc)", 1..3),
            k2 in proptest::collection::vec("(lead|pb|ocean|soil|marine|dust|zinc)", 1..3),
        ) {
            let c = corpus(vec![
                paper("a", "Lead in the ocean", ""),
                paper("b", "Soil chemistry", "Pb in dust"),
                paper("c", "Zinc isotopes", "marine"),
            ]);
            let narrow = keyword_search(&c, &k1);
            let mut both = k1.clone();
            both.extend(k2);
            let wide = keyword_search(&c, &both);
            prop_assert!(narrow.iter().all(|id| wide.contains(id)));
        }
    }
}
