//! End-to-end runs over the bundled mini-corpus.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use compass_core::corpus::load_corpus;
use compass_core::evaluate::{evaluate, GoldSet, MatchCriteria};
use compass_core::gateway::{
    Backend, BackendError, CompletionRequest, FaultInjector, FaultMode, RetryPolicy, INJECTED_GARBAGE,
};
use compass_core::harmonize::merge_sources;
use compass_core::pipeline::{
    build_backend, load_answer_key, record_fixtures, run_pipeline, run_pipeline_with_backend, PipelineConfig,
    PipelineOutput, MANIFEST_FILE,
};
use compass_core::store::{export, load_csv, ExportFormat, RecordStore, RECORDS_FILE};
use compass_core::{MeasurementType, SourceKind};

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/minicorpus")
}

fn config(name: &str, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&corpus_dir().join(name)).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg.backend.retry = RetryPolicy::immediate(3);
    cfg
}

fn run(name: &str, out: &Path) -> PipelineOutput {
    run_pipeline(&config(name, out)).unwrap()
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn mock_run_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("run.toml", dir.path());
    let gold = GoldSet::load(&corpus_dir().join("gold.json")).unwrap();
    let report = evaluate(&out.predictions, &gold, &MatchCriteria::default()).unwrap();
    for m in [report.paper_classification.metrics, report.table_classification.metrics] {
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (Some(1.0), 1.0, 1.0, 1.0));
    }
    let ex = report.extraction.unwrap();
    assert_eq!((ex.metrics.precision, ex.metrics.recall, ex.metrics.f1), (1.0, 1.0, 1.0));
    assert_eq!(ex.true_positives, 40);
    assert_eq!(ex.per_paper_recall, Some(1.0));

    let c = out.manifest.counts;
    assert_eq!((c.papers_seen, c.papers_candidate, c.papers_target), (12, 12, 3));
    assert_eq!((c.records_extracted, c.records_validated, c.records_quarantined), (40, 40, 0));
    assert_eq!(c.cells_skipped, 1);
    assert!(c.accounting_holds());
    assert_eq!(out.manifest.exit_code(), 0);
    assert_eq!(out.manifest.rollback_events, 0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run("run.toml", a.path());
    let rb = run("run.toml", b.path());
    for f in [RECORDS_FILE, "records.idx.json", "quarantine.jsonl", "predictions.json", "pipeline_state.json"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
    assert_eq!(ra.manifest.identity(), rb.manifest.identity());
    for (fmt, name) in [(ExportFormat::Csv, "x.csv"), (ExportFormat::GeoJson, "x.geojson"), (ExportFormat::Jsonl, "x.jsonl")] {
        export(&ra.unified.records, fmt, &a.path().join(name)).unwrap();
        export(&rb.unified.records, fmt, &b.path().join(name)).unwrap();
        assert_eq!(read(a.path().join(name)), read(b.path().join(name)), "{name}");
    }
}

#[test]
fn injected_faults_roll_back_to_the_same_store() {
    let clean_dir = tempfile::tempdir().unwrap();
    run("run.toml", clean_dir.path());
    for mode in [FaultMode::Garbage, FaultMode::Transient] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("run.toml", dir.path());
        let backend = Arc::new(FaultInjector::new(build_backend(&cfg).unwrap(), mode));
        let out = run_pipeline_with_backend(&cfg, backend.clone()).unwrap();
        assert!(backend.faults_injected() > 0);
        assert_eq!(read(dir.path().join(RECORDS_FILE)), read(clean_dir.path().join(RECORDS_FILE)), "{mode:?}");
        assert!(out.manifest.max_attempts_used <= cfg.max_attempts);
        if mode == FaultMode::Garbage {
            assert!(out.manifest.rollback_events >= 1);
            assert_eq!(out.manifest.rollback_resolved, out.manifest.rollback_events);
        } else {
            // Transient errors are absorbed by the gateway's own retries.
            assert_eq!(out.manifest.rollback_events, 0);
        }
    }
}

/// Replies with garbage for a pseudo-random share of requests, decided per
/// request tag (which carries the retry nonce) so runs are reproducible.
struct RandomFaults {
    inner: Arc<dyn Backend>,
    seed: u64,
    per_mille: u64,
}

impl Backend for RandomFaults {
    fn id(&self) -> String {
        format!("{}+random", self.inner.id())
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut h = DefaultHasher::new();
        (self.seed, &request.request_tag).hash(&mut h);
        if h.finish() % 1000 < self.per_mille {
            return Ok(INJECTED_GARBAGE.to_string());
        }
        self.inner.send(request)
    }
}

#[test]
fn accounting_holds_under_random_faults() {
    let mut saw_quarantine = false;
    for seed in 0..24 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(if seed % 2 == 0 { "run.toml" } else { "fused.toml" }, dir.path());
        let backend = Arc::new(RandomFaults { inner: build_backend(&cfg).unwrap(), seed, per_mille: 350 });
        let out = run_pipeline_with_backend(&cfg, backend).unwrap();
        let c = out.manifest.counts;
        assert!(c.accounting_holds(), "seed {seed}: {c:?}");
        assert!(out.manifest.max_attempts_used <= cfg.max_attempts);
        assert_eq!(c.records_unified, RecordStore::open(dir.path()).unwrap().len());
        assert_eq!(c.records_quarantined, out.quarantine.len());
        saw_quarantine |= c.subjects_quarantined > 0;
    }
    assert!(saw_quarantine, "fault rate never exhausted a subject");
}

#[test]
fn fusion_with_external_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("fused.toml", dir.path());
    let c = out.manifest.counts;
    assert_eq!(c.records_fused, 10);
    assert_eq!(c.records_dedup_removed, 5);
    assert_eq!(c.records_validated, 35);
    assert_eq!(c.records_unified, 45);
    assert!(c.accounting_holds());
    assert_eq!(out.unified.merge_log.len(), 5);
    for m in &out.unified.merge_log {
        assert_eq!(m.removed_source, SourceKind::Extracted);
        let survivor = out.unified.records.iter().find(|r| r.record_id == m.survivor_record_id).unwrap();
        assert_eq!(survivor.source_kind(), SourceKind::Structured);
        assert_eq!(survivor.provenance.len(), 2);
    }
    let again = merge_sources(out.unified.records.clone(), &[]);
    assert_eq!(again.records, out.unified.records);
    assert!(again.merge_log.is_empty());
    // The scattered file reports ng/kg; it is stored in pmol/kg.
    let scattered = out.unified.records.iter().find(|r| r.source_kind() == SourceKind::Scattered && r.measurement_type == MeasurementType::PbConc).unwrap();
    assert_eq!(scattered.unit, "pmol/kg");
    assert!((scattered.value - 12.5 * 1000.0 / 207.2).abs() < 1e-9);
}

#[test]
fn committed_fixtures_match_the_answer_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("run.toml", dir.path());
    let answers = load_answer_key(&corpus_dir().join("answers.json")).unwrap();
    let (table, _) = record_fixtures(&cfg, answers).unwrap();
    let committed = std::fs::read_to_string(corpus_dir().join("fixtures.json")).unwrap();
    assert_eq!(table.to_json() + "\n", committed, "fixtures are stale; re-record them with `compass fixtures record`");
}

#[test]
fn exported_records_resolve_to_their_source_cells() {
    let dir = tempfile::tempdir().unwrap();
    run("run.toml", dir.path());
    let store = RecordStore::open(dir.path()).unwrap();
    let csv = dir.path().join("export.csv");
    export(&store.records().unwrap(), ExportFormat::Csv, &csv).unwrap();
    let records = load_csv(&csv).unwrap();
    let corpus = load_corpus(&corpus_dir().join("papers")).unwrap();
    assert_eq!(records.len(), 40);
    for r in &records {
        let s = r.source();
        let paper = &corpus.papers[&s.paper_id];
        assert_eq!(s.source_uri, format!("file://{}.json", s.paper_id));
        let table = paper.table(&s.table_id).unwrap();
        let row = &table.data_rows[s.row_index];
        let col = table.column_headers().iter().position(|h| *h == s.column_header).unwrap();
        assert!(!row[col].trim().is_empty());
    }
}

#[test]
fn storage_units_follow_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("run.toml", dir.path());
    cfg.canonical_units.insert("PbConc".into(), "nmol/kg".into());
    let out = run_pipeline(&cfg).unwrap();
    let base_dir = tempfile::tempdir().unwrap();
    let base = run("run.toml", base_dir.path());
    let find = |o: &PipelineOutput, id: &str| o.unified.records.iter().find(|r| r.record_id == id).cloned().unwrap();
    let (a, b) = (find(&out, "P01/T1/r000/c4"), find(&base, "P01/T1/r000/c4"));
    assert_eq!(a.unit, "nmol/kg");
    assert!((a.value * 1000.0 - b.value).abs() < 1e-9 * b.value);
    assert_eq!(find(&out, "P03/T1/r000/c4"), find(&base, "P03/T1/r000/c4"));
}

#[test]
fn empty_corpus_gives_zero_counts() {
    let corpus = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("run.toml", dir.path());
    cfg.corpus_path = corpus.path().to_path_buf();
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(out.manifest.counts, Default::default());
    assert_eq!(out.manifest.exit_code(), 0);
    assert!(dir.path().join(MANIFEST_FILE).exists());
    assert!(RecordStore::open(dir.path()).unwrap().is_empty());
}

#[test]
fn missing_fixture_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("run.toml", dir.path());
    cfg.backend.fixtures = Some(dir.path().join("nope.json"));
    assert!(run_pipeline(&cfg).is_err());
}
