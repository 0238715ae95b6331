use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MissPolicy {
    #[default]
    Error,
    /// Answer with the prompt's output schema hint.
    EchoSchemaDefault,
}

/// Canned responses keyed by the prompt digest of (system_text, user_text).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MockFixtureTable {
    pub entries: BTreeMap<String, String>,
    pub miss_policy: MissPolicy,
}

impl MockFixtureTable {
    /// Reads a fixture file: a JSON object mapping digest to response text.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let entries: BTreeMap<String, String> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Ok(MockFixtureTable { entries, miss_policy: MissPolicy::Error })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("fixture map serializes")
    }
}

/// Deterministic offline backend.
pub struct MockBackend {
    table: MockFixtureTable,
}

impl MockBackend {
    pub fn new(table: MockFixtureTable) -> Self {
        MockBackend { table }
    }
}

impl Backend for MockBackend {
    fn id(&self) -> String {
        "mock".into()
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let digest = request.digest();
        match self.table.entries.get(&digest) {
            Some(text) => Ok(text.clone()),
            None => match self.table.miss_policy {
                MissPolicy::Error => Err(BackendError::FixtureMiss(digest)),
                MissPolicy::EchoSchemaDefault => Ok(request.bundle.output_schema_hint.clone()),
            },
        }
    }
}
