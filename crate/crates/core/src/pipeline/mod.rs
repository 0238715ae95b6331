//! End-to-end driver: collection, extraction and aggregation over a corpus,
//! writing the record store and run artifacts.

mod config;
mod manifest;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{classify_paper, classify_table, table_subject, PaperCategory, TableCategory};
use crate::corpus::{keyword_search, load_corpus, CorpusError, ParsedPaper, TableBlock};
use crate::digest::{json_digest, prompt_digest, sha256_hex};
use crate::evaluate::Predictions;
use crate::extract::{
    associate_metadata, extract_table_records, extraction_prompt, flags, ColumnSpec, MeasurementType, PbRecord,
    SkippedCell, SourceKind,
};
use crate::gateway::{
    AnswerKeyBackend, Backend, Gateway, GatewayConfig, HttpBackend, MockBackend, MockFixtureTable, RecordingBackend,
};
use crate::harmonize::{
    load_external, merge_sources, normalize_headers, resolve_conversion, AliasTable, ExternalDataset, ExternalError,
    HeaderMapping, UnifiedDataset, UnitConversion, UnitError, UnitRegistry,
};
use crate::knowledge_tree::{load_tree_file, marine_pb_tree, KnowledgeTree, TreeError};
use crate::stage::StageContext;
use crate::store::{RecordStore, StoreError};
use crate::validate::{
    all_tree_checks, execute_with_rollback, run_checks, CheckSpec, OceanMask, PipelineState, RollbackError, Severity,
    StepFailure, ValidationReport,
};

pub use config::{BackendConfig, BackendKind, PipelineConfig};
pub use manifest::{RunCounts, RunManifest};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const QUARANTINE_FILE: &str = "quarantine.jsonl";
pub const MERGE_LOG_FILE: &str = "merge_log.jsonl";
pub const SKIPPED_FILE: &str = "skipped_cells.jsonl";
pub const VALIDATION_FILE: &str = "validation_report.json";
pub const STATE_FILE: &str = "pipeline_state.json";
pub const PREDICTIONS_FILE: &str = "predictions.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    External(#[from] ExternalError),
    #[error("fixtures: {0}")]
    Fixtures(String),
    #[error(transparent)]
    Units(#[from] UnitError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Everything a run produced, as written to the output directory.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub manifest: RunManifest,
    pub unified: UnifiedDataset,
    pub quarantine: Vec<PbRecord>,
    pub skipped: Vec<SkippedCell>,
    pub predictions: Predictions,
    pub validation: ValidationReport,
    pub state: PipelineState,
}

pub fn build_backend(config: &PipelineConfig) -> Result<Arc<dyn Backend>, PipelineError> {
    match config.backend.kind {
        BackendKind::Mock => {
            let path = config.backend.fixtures.as_ref().ok_or_else(|| PipelineError::Config("mock backend needs fixtures".into()))?;
            let mut table = MockFixtureTable::load(path).map_err(PipelineError::Fixtures)?;
            table.miss_policy = config.backend.miss_policy;
            Ok(Arc::new(MockBackend::new(table)))
        }
        BackendKind::Http => {
            let url = config.backend.endpoint.clone().ok_or_else(|| PipelineError::Config("http backend needs an endpoint".into()))?;
            let model = config.backend.model.clone().unwrap_or_else(|| "default".into());
            Ok(Arc::new(HttpBackend::from_env(url, model)))
        }
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    run_pipeline_with_backend(config, build_backend(config)?)
}

/// Output of one table's extraction step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TableOutput {
    pub columns: Vec<ColumnSpec>,
    pub records: Vec<PbRecord>,
    pub skipped: Vec<SkippedCell>,
    pub report: ValidationReport,
}

#[derive(Default)]
struct PaperOutcome {
    table_labels: Vec<(String, TableCategory)>,
    tables_target: usize,
    extracted: usize,
    passed: Vec<PbRecord>,
    quarantined: Vec<PbRecord>,
    skipped: Vec<SkippedCell>,
    report: ValidationReport,
    state: PipelineState,
}

type ConversionCache = HashMap<(String, MeasurementType), Result<UnitConversion, String>>;

/// Shared, read-only inputs of the extraction stage.
struct Stage<'a> {
    ctx: StageContext<'a>,
    registry: &'a UnitRegistry,
    checks: &'a [CheckSpec],
    mask: &'a OceanMask,
    aliases: &'a AliasTable,
}

impl Stage<'_> {
    /// Converts a record to the validation unit of its type. Unknown units go
    /// to the backend once per (unit, type); a unit that cannot be converted is
    /// left as printed, so the unit check rejects the record.
    fn standardize(&self, rec: &mut PbRecord, cache: &mut ConversionCache, state: &mut PipelineState) {
        let key = (rec.unit.clone(), rec.measurement_type);
        let conversion = cache.entry(key).or_insert_with(|| {
            resolve_conversion(self.registry, &rec.unit, rec.measurement_type, &self.ctx, state).map_err(|e| e.to_string())
        });
        match conversion {
            Ok(c) => {
                rec.value = c.apply(rec.value);
                rec.unit = c.to_unit.clone();
            }
            Err(reason) => log::warn!("{}: unit `{}` not converted: {reason}", rec.record_id, rec.unit),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn extraction_attempt(
        &self,
        paper: &ParsedPaper,
        table: &TableBlock,
        category: TableCategory,
        mappings: &[HeaderMapping],
        cache: &mut ConversionCache,
        state: &mut PipelineState,
        attempt: u32,
    ) -> Result<TableOutput, StepFailure<TableOutput>> {
        let drafts = extract_table_records(paper, table, category, &self.ctx, attempt)
            .map_err(|f| f.map_partial(|d| TableOutput { columns: d.columns, ..Default::default() }))?;
        let mut records = associate_metadata(drafts.records, table, paper, mappings, self.aliases);
        let unresolved = mappings.iter().any(|m| m.unresolved);
        for rec in &mut records {
            self.standardize(rec, cache, state);
            if unresolved {
                rec.flag(flags::HEADER_UNRESOLVED);
            }
        }
        let report = run_checks(&records, self.checks, self.mask);
        let failing = report.invalid_records().len();
        let out = TableOutput { columns: drafts.columns, records, skipped: drafts.skipped, report };
        if failing == 0 {
            Ok(out)
        } else {
            let reason = format!("{failing} of {} records fail fatal checks", out.records.len());
            Err(StepFailure::Invalid { partial: out, reason })
        }
    }

    fn process_table(
        &self,
        paper: &ParsedPaper,
        table: &TableBlock,
        category: TableCategory,
        out: &mut PaperOutcome,
    ) {
        let subject = table_subject(&paper.paper_id, &table.table_id);
        let mappings = normalize_headers(&table.column_headers(), self.aliases, &self.ctx, &mut out.state);
        let digest = match extraction_prompt(paper, table, category, &self.ctx) {
            Ok(b) => prompt_digest(&b.system_text, &b.user_text),
            Err(e) => {
                log::warn!("{subject}: {e}");
                return;
            }
        };
        let mut nested = PipelineState::new();
        let mut cache = ConversionCache::new();
        let outcome = execute_with_rollback(&mut out.state, "extract_table", &subject, &digest, self.ctx.max_attempts, |attempt| {
            self.extraction_attempt(paper, table, category, &mappings, &mut cache, &mut nested, attempt)
        });
        out.state.absorb(nested);
        let output = match outcome {
            Ok(o) => o,
            Err(RollbackError::QuarantinedSubject { last_partial: Some(o), .. }) => o,
            Err(e) => {
                log::warn!("{subject}: {e}");
                return;
            }
        };
        out.extracted += output.records.len();
        out.skipped.extend(output.skipped);
        for mut rec in output.records {
            let mut fatal = false;
            let id = rec.record_id.clone();
            for f in output.report.failures_for(&id) {
                fatal |= f.severity == Severity::Fatal;
                rec.flag(match f.severity {
                    Severity::Fatal => format!("check_failed:{}", f.check_id),
                    Severity::Flag => format!("check_flagged:{}", f.check_id),
                });
            }
            if fatal {
                out.quarantined.push(rec);
            } else {
                out.passed.push(rec);
            }
        }
        out.report.merge(output.report);
    }

    fn process_paper(&self, paper: &ParsedPaper, category: PaperCategory) -> PaperOutcome {
        let mut out = PaperOutcome::default();
        for table in &paper.tables {
            let label = match classify_table(paper, table, category, &self.ctx, &mut out.state) {
                Ok(r) => r.label,
                Err(e) => {
                    log::warn!("{}/{}: {e}", paper.paper_id, table.table_id);
                    TableCategory::Unclassified
                }
            };
            out.table_labels.push((table_subject(&paper.paper_id, &table.table_id), label));
            if label.is_target() {
                out.tables_target += 1;
                self.process_table(paper, table, label, &mut out);
            }
        }
        out
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StoreError> {
    let body: String = items.iter().map(|i| serde_json::to_string(i).expect("serializes") + "\n").collect();
    std::fs::write(path, body).map_err(|e| StoreError::UnwritablePath { path: path.display().to_string(), reason: e.to_string() })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let body = serde_json::to_string_pretty(value).expect("serializes") + "\n";
    std::fs::write(path, body).map_err(|e| StoreError::UnwritablePath { path: path.display().to_string(), reason: e.to_string() })
}

/// Runs the pipeline with an explicit backend (fixture recording, fault
/// injection, tests).
pub fn run_pipeline_with_backend(config: &PipelineConfig, backend: Arc<dyn Backend>) -> Result<PipelineOutput, PipelineError> {
    let started = Instant::now();
    let tree: KnowledgeTree = match &config.tree_path {
        Some(p) => load_tree_file(p)?,
        None => marine_pb_tree(),
    };
    let corpus = load_corpus(&config.corpus_path)?;
    let overrides = config.canonical_overrides()?;
    let registry = UnitRegistry::bundled();
    let storage = registry.with_canonical_overrides(&overrides)?;
    let externals: Vec<ExternalDataset> =
        config.external.iter().map(|p| load_external(p, &storage)).collect::<Result<_, _>>()?;

    let gateway = Gateway::new(
        backend,
        GatewayConfig { retry: config.backend.retry, max_parallel: config.max_parallel, token_budget: config.token_budget },
    );
    let mut ctx = StageContext::new(&tree, &gateway);
    ctx.max_attempts = config.max_attempts;
    ctx.token_budget = config.token_budget;
    let checks = all_tree_checks(&tree);
    let mask = OceanMask::bundled();
    let stage = Stage { ctx, registry, checks: &checks, mask: &mask, aliases: AliasTable::bundled() };

    // Collection: keyword recall, then paper classification.
    let candidates = keyword_search(&corpus, &config.keywords);
    let classified: Vec<(String, PaperCategory, PipelineState)> = candidates
        .par_iter()
        .map(|id| {
            let mut state = PipelineState::new();
            let label = match classify_paper(&corpus.papers[id], config.full_text_classification, &stage.ctx, &mut state) {
                Ok(r) => r.label,
                Err(e) => {
                    log::warn!("{id}: {e}");
                    PaperCategory::Unclassified
                }
            };
            (id.clone(), label, state)
        })
        .collect();
    let mut state = PipelineState::new();
    let mut paper_labels = BTreeMap::new();
    for (id, label, s) in &classified {
        paper_labels.insert(id.clone(), *label);
        state.absorb(s.clone());
    }

    // Extraction, one paper per task; tables of a paper in order.
    let outcomes: Vec<PaperOutcome> = classified
        .par_iter()
        .map(|(id, label, _)| stage.process_paper(&corpus.papers[id], *label))
        .collect();
    let mut counts = RunCounts {
        papers_seen: corpus.papers.len(),
        papers_candidate: candidates.len(),
        papers_target: paper_labels.values().filter(|l| l.is_target()).count(),
        tables_seen: corpus.papers.values().map(|p| p.tables.len()).sum(),
        ..Default::default()
    };
    let mut table_labels = BTreeMap::new();
    let mut passed = Vec::new();
    let mut quarantine = Vec::new();
    let mut skipped = Vec::new();
    let mut validation = ValidationReport::default();
    for o in outcomes {
        table_labels.extend(o.table_labels);
        counts.tables_target += o.tables_target;
        counts.records_extracted += o.extracted;
        passed.extend(o.passed);
        quarantine.extend(o.quarantined);
        skipped.extend(o.skipped);
        validation.merge(o.report);
        state.absorb(o.state);
    }

    // Aggregation: storage units, then fusion with external datasets.
    if !overrides.is_empty() {
        for rec in &mut passed {
            let target = storage.canonical_unit(rec.measurement_type).to_string();
            if target != rec.unit {
                let c = registry.conversion_between(&rec.unit, &target, rec.measurement_type)?;
                rec.value = c.apply(rec.value);
                rec.unit = c.to_unit;
            }
        }
    }
    passed.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    quarantine.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    let predictions = Predictions { paper_labels, table_labels, records: passed.clone() };
    let unified = merge_sources(passed, &externals);

    counts.records_quarantined = quarantine.len();
    counts.records_dedup_removed = unified.merge_log.iter().filter(|m| m.removed_source == SourceKind::Extracted).count();
    counts.records_validated = unified.records.iter().filter(|r| r.source_kind() == SourceKind::Extracted).count();
    counts.records_fused = externals.iter().map(|d| d.records.len()).sum();
    counts.records_unified = unified.records.len();
    counts.cells_skipped = skipped.len();
    counts.subjects_quarantined = state.quarantined_subjects.len();

    let config_digest = config.digest();
    let corpus_digest = json_digest(&corpus.papers);
    let backend_id = gateway.backend_id();
    let outputs: Vec<String> = [
        crate::store::RECORDS_FILE,
        crate::store::INDEX_FILE,
        QUARANTINE_FILE,
        MERGE_LOG_FILE,
        SKIPPED_FILE,
        VALIDATION_FILE,
        STATE_FILE,
        PREDICTIONS_FILE,
        MANIFEST_FILE,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let manifest = RunManifest {
        run_id: sha256_hex(format!("{config_digest}:{corpus_digest}:{backend_id}").as_bytes())[..16].to_string(),
        config_digest,
        corpus_digest,
        backend_id,
        counts,
        rollback_events: state.rollback_events.len(),
        rollback_resolved: state.rollback_events.iter().filter(|e| e.resolved).count(),
        max_attempts_used: state.max_attempts_used(),
        load_warnings: corpus.manifest.load_warnings.clone(),
        outputs,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    debug_assert!(manifest.counts.accounting_holds());

    let out_dir = &config.output_dir;
    let mut store = RecordStore::create(out_dir)?;
    store.append(&unified.records)?;
    write_jsonl(&out_dir.join(QUARANTINE_FILE), &quarantine)?;
    write_jsonl(&out_dir.join(MERGE_LOG_FILE), &unified.merge_log)?;
    write_jsonl(&out_dir.join(SKIPPED_FILE), &skipped)?;
    write_json(&out_dir.join(VALIDATION_FILE), &validation)?;
    write_json(&out_dir.join(STATE_FILE), &state)?;
    write_json(&out_dir.join(PREDICTIONS_FILE), &predictions)?;
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;

    Ok(PipelineOutput { manifest, unified, quarantine, skipped, predictions, validation, state })
}

/// Runs the pipeline against a hand-written answer key (request tag →
/// reply) and returns the replies keyed by prompt digest, ready to be saved
/// as a mock fixture file.
pub fn record_fixtures(
    config: &PipelineConfig,
    answers: HashMap<String, String>,
) -> Result<(MockFixtureTable, PipelineOutput), PipelineError> {
    let recorder = Arc::new(RecordingBackend::new(Arc::new(AnswerKeyBackend::new(answers))));
    let output = run_pipeline_with_backend(config, recorder.clone())?;
    Ok((recorder.fixture_table(), output))
}

/// Reads an answer key file: a JSON object mapping request tag to reply text.
pub fn load_answer_key(path: &Path) -> Result<HashMap<String, String>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Fixtures(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Fixtures(format!("{}: {e}", path.display())))
}
