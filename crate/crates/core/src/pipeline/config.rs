use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::evaluate::MatchCriteria;
use crate::extract::MeasurementType;
use crate::gateway::{MissPolicy, RetryPolicy};
use crate::knowledge_tree::DEFAULT_TOKEN_BUDGET;
use crate::validate::DEFAULT_MAX_ATTEMPTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Mock fixture file (digest → response).
    pub fixtures: Option<PathBuf>,
    pub miss_policy: MissPolicy,
    /// Chat-completion URL for the HTTP backend; the key comes from the environment.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub retry: RetryPolicy,
}

fn default_keywords() -> Vec<String> {
    ["pb", "lead", "210pb", "lead isotopes"].iter().map(|s| s.to_string()).collect()
}

fn default_max_parallel() -> usize {
    4
}

fn default_max_attempts() -> u32 {
    DEFAULT_MAX_ATTEMPTS
}

fn default_token_budget() -> usize {
    DEFAULT_TOKEN_BUDGET
}

fn default_seed_note() -> String {
    "mock runs are deterministic without a seed".into()
}

/// Run configuration, stored as TOML. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    /// Knowledge tree JSON; the bundled marine Pb tree when absent.
    #[serde(default)]
    pub tree_path: Option<PathBuf>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_keywords")]
    pub keywords: Vec<String>,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_token_budget")]
    pub token_budget: usize,
    /// Classify papers on section text as well as title and abstract.
    #[serde(default)]
    pub full_text_classification: bool,
    /// Matching tolerances used when the run is evaluated.
    #[serde(default)]
    pub tolerances: MatchCriteria,
    /// Measurement type name → unit in which records are stored.
    #[serde(default)]
    pub canonical_units: BTreeMap<String, String>,
    /// Sidecar column maps of structured or scattered datasets to fuse.
    #[serde(default)]
    pub external: Vec<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_seed_note")]
    pub seed_note: String,
}

impl PipelineConfig {
    pub fn new(corpus_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            corpus_path: corpus_path.into(),
            tree_path: None,
            backend: BackendConfig::default(),
            keywords: default_keywords(),
            max_parallel: default_max_parallel(),
            max_attempts: default_max_attempts(),
            token_budget: default_token_budget(),
            full_text_classification: false,
            tolerances: MatchCriteria::default(),
            canonical_units: BTreeMap::new(),
            external: Vec::new(),
            output_dir: output_dir.into(),
            seed_note: default_seed_note(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.output_dir);
        if let Some(p) = self.tree_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.backend.fixtures.as_mut() {
            fix(p);
        }
        self.external.iter_mut().for_each(fix);
    }

    pub fn canonical_overrides(&self) -> Result<BTreeMap<MeasurementType, String>, PipelineError> {
        self.canonical_units
            .iter()
            .map(|(t, u)| Ok((t.parse().map_err(PipelineError::Config)?, u.clone())))
            .collect()
    }

    /// Checks that every input path exists and the backend is usable.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let must_exist = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        must_exist(&self.corpus_path, "corpus")?;
        if let Some(p) = &self.tree_path {
            must_exist(p, "tree")?;
        }
        for p in &self.external {
            must_exist(p, "external dataset")?;
        }
        match self.backend.kind {
            BackendKind::Mock => match &self.backend.fixtures {
                Some(p) => must_exist(p, "fixture file")?,
                None => return Err(PipelineError::Config("mock backend needs a fixture file".into())),
            },
            BackendKind::Http => {
                if self.backend.endpoint.is_none() {
                    return Err(PipelineError::Config("http backend needs an endpoint".into()));
                }
            }
        }
        if self.keywords.is_empty() {
            return Err(PipelineError::Config("keyword list is empty".into()));
        }
        if self.max_attempts == 0 || self.max_parallel == 0 {
            return Err(PipelineError::Config("max_attempts and max_parallel must be at least 1".into()));
        }
        self.canonical_overrides().map(|_| ())
    }

    /// Digest of the settings that affect outputs; the output directory is
    /// left out so the same run written to two places has one digest.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        crate::digest::json_digest(&c)
    }
}
