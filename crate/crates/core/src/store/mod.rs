//! Append-only record store: a JSON-lines log plus an id → line index.

mod export;
mod stats;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::extract::PbRecord;

pub use export::{export, load_csv, load_jsonl, to_csv_string, to_geojson, ExportFormat, CSV_COLUMNS};
pub use stats::{region_of, stats_report, Region, StatsReport};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const INDEX_FILE: &str = "records.idx.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot write {path}: {reason}")]
    UnwritablePath { path: String, reason: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("record id `{0}` already stored")]
    DuplicateId(String),
    #[error("{path} line {line}: {reason}")]
    Corrupt { path: String, line: usize, reason: String },
}

fn write_err(path: &Path, e: impl ToString) -> StoreError {
    StoreError::UnwritablePath { path: path.display().to_string(), reason: e.to_string() }
}

fn read_err(path: &Path, e: impl ToString) -> StoreError {
    StoreError::Io { path: path.display().to_string(), reason: e.to_string() }
}

/// Records are only ever appended; the index maps each id to its line.
#[derive(Debug)]
pub struct RecordStore {
    dir: PathBuf,
    index: BTreeMap<String, usize>,
}

impl RecordStore {
    /// Starts an empty store in `dir`, replacing any previous one there.
    pub fn create(dir: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
        let log = dir.join(RECORDS_FILE);
        File::create(&log).map_err(|e| write_err(&log, e))?;
        let store = RecordStore { dir: dir.to_path_buf(), index: BTreeMap::new() };
        store.write_index()?;
        Ok(store)
    }

    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let idx = dir.join(INDEX_FILE);
        let text = std::fs::read_to_string(&idx).map_err(|e| read_err(&idx, e))?;
        let index = serde_json::from_str(&text).map_err(|e| read_err(&idx, e))?;
        Ok(RecordStore { dir: dir.to_path_buf(), index })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, record_id: &str) -> bool {
        self.index.contains_key(record_id)
    }

    fn write_index(&self) -> Result<(), StoreError> {
        let idx = self.dir.join(INDEX_FILE);
        let mut text = serde_json::to_string_pretty(&self.index).expect("index serializes");
        text.push('\n');
        std::fs::write(&idx, text).map_err(|e| write_err(&idx, e))
    }

    /// Appends records in the given order. Nothing is written if any id is
    /// already present or repeated in the batch.
    pub fn append(&mut self, records: &[PbRecord]) -> Result<(), StoreError> {
        let mut seen = std::collections::BTreeSet::new();
        for r in records {
            if self.index.contains_key(&r.record_id) || !seen.insert(r.record_id.as_str()) {
                return Err(StoreError::DuplicateId(r.record_id.clone()));
            }
        }
        let log = self.dir.join(RECORDS_FILE);
        let mut file = OpenOptions::new().append(true).open(&log).map_err(|e| write_err(&log, e))?;
        let mut buf = String::new();
        let mut line = self.index.len();
        for r in records {
            buf.push_str(&serde_json::to_string(r).expect("record serializes"));
            buf.push('\n');
            self.index.insert(r.record_id.clone(), line);
            line += 1;
        }
        file.write_all(buf.as_bytes()).map_err(|e| write_err(&log, e))?;
        self.write_index()
    }

    /// All records in append order.
    pub fn records(&self) -> Result<Vec<PbRecord>, StoreError> {
        load_jsonl(&self.dir.join(RECORDS_FILE))
    }

    pub fn get(&self, record_id: &str) -> Result<Option<PbRecord>, StoreError> {
        let Some(&line) = self.index.get(record_id) else { return Ok(None) };
        let log = self.dir.join(RECORDS_FILE);
        let file = File::open(&log).map_err(|e| read_err(&log, e))?;
        let text = BufReader::new(file)
            .lines()
            .nth(line)
            .ok_or_else(|| StoreError::Corrupt { path: log.display().to_string(), line, reason: "index points past end".into() })?
            .map_err(|e| read_err(&log, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| StoreError::Corrupt { path: log.display().to_string(), line, reason: e.to_string() })
    }
}
