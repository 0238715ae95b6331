use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use compass_core::evaluate::{evaluate, fill_missing, render_report, GoldSet, MatchCriteria, Predictions};
use compass_core::gateway::{FaultInjector, FaultMode};
use compass_core::pipeline::{
    build_backend, load_answer_key, record_fixtures, run_pipeline_with_backend, BackendKind, PipelineConfig, RunManifest,
    MANIFEST_FILE, PREDICTIONS_FILE,
};
use compass_core::store::{export, stats_report, ExportFormat, RecordStore};

#[derive(Parser)]
#[command(name = "compass", version, about = "Marine Pb literature extraction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run collection, extraction and aggregation over a corpus.
    Run(RunArgs),
    /// Score a run's predictions against gold annotations.
    Eval(EvalArgs),
    /// Write the record store as CSV, JSON lines or GeoJSON.
    Export(ExportArgs),
    /// Counts by measurement type, source and region.
    Stats(StoreArg),
    /// Mock fixture maintenance.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    /// First reply to every prompt is malformed.
    Garbage,
    /// First call for every prompt fails as a transient error.
    Transient,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Chat-completion URL for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    keywords: Option<Vec<String>>,
    /// Sidecar column map of an external dataset; repeatable.
    #[arg(long)]
    external: Vec<PathBuf>,
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    inject_faults: Option<FaultArg>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    /// predictions.json, or the output directory of a run.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    value_tol: Option<f64>,
    #[arg(long)]
    coord_tol: Option<f64>,
    #[arg(long)]
    depth_tol: Option<f64>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct StoreArg {
    /// Output directory of a run.
    #[arg(long, default_value = "out")]
    store: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    store: StoreArg,
    #[arg(long)]
    format: ExportFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FixturesCommand {
    /// Run a config against an answer key and save the replies by prompt digest.
    Record {
        #[arg(long)]
        config: PathBuf,
        /// JSON object of request tag → reply.
        #[arg(long)]
        answers: PathBuf,
        /// Fixture file to write; defaults to the config's fixture path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_config(args: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = match (&args.config, &args.corpus, &args.out) {
        (Some(path), _, _) => PipelineConfig::load(path)?,
        (None, Some(corpus), Some(out)) => PipelineConfig::new(corpus, out),
        _ => bail!("give --config, or both --corpus and --out"),
    };
    if let Some(c) = &args.corpus {
        cfg.corpus_path = c.clone();
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = &args.tree {
        cfg.tree_path = Some(t.clone());
    }
    if let Some(b) = args.backend {
        cfg.backend.kind = match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Http => BackendKind::Http,
        };
    }
    if let Some(f) = &args.fixtures {
        cfg.backend.fixtures = Some(f.clone());
    }
    if let Some(e) = &args.endpoint {
        cfg.backend.endpoint = Some(e.clone());
    }
    if let Some(m) = &args.model {
        cfg.backend.model = Some(m.clone());
    }
    if let Some(k) = &args.keywords {
        cfg.keywords = k.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    cfg.external.extend(args.external.iter().cloned());
    if let Some(n) = args.max_attempts {
        cfg.max_attempts = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let cfg = run_config(&args)?;
    let mut backend = build_backend(&cfg)?;
    if let Some(mode) = args.inject_faults {
        let mode = match mode {
            FaultArg::Garbage => FaultMode::Garbage,
            FaultArg::Transient => FaultMode::Transient,
        };
        backend = Arc::new(FaultInjector::new(backend, mode));
    }
    let out = run_pipeline_with_backend(&cfg, backend)?;
    let m = &out.manifest;
    let c = &m.counts;
    println!("run {} -> {}", m.run_id, cfg.output_dir.display());
    println!(
        "papers {} seen, {} candidate, {} target; tables {} target of {}",
        c.papers_seen, c.papers_candidate, c.papers_target, c.tables_target, c.tables_seen
    );
    println!(
        "records {} extracted, {} validated, {} quarantined, {} deduplicated, {} unified",
        c.records_extracted, c.records_validated, c.records_quarantined, c.records_dedup_removed, c.records_unified
    );
    println!("rollback events {} ({} resolved)", m.rollback_events, m.rollback_resolved);
    Ok(m.exit_code() as u8)
}

fn cmd_eval(args: EvalArgs) -> Result<u8> {
    let gold = GoldSet::load(&args.gold)?;
    let pred_path = if args.pred.is_dir() { args.pred.join(PREDICTIONS_FILE) } else { args.pred.clone() };
    let mut preds = Predictions::load(&pred_path)?;
    fill_missing(&mut preds.paper_labels, &gold.paper_labels);
    fill_missing(&mut preds.table_labels, &gold.table_labels);
    let mut criteria = MatchCriteria::default();
    if let Some(v) = args.value_tol {
        criteria.value_rel_tol = v;
    }
    if let Some(v) = args.coord_tol {
        criteria.coord_tol_deg = v;
    }
    if let Some(v) = args.depth_tol {
        criteria.depth_tol_m = v;
    }
    let manifest: Option<RunManifest> = pred_path
        .parent()
        .map(|d| d.join(MANIFEST_FILE))
        .filter(|p| p.exists())
        .map(|p| read_manifest(&p))
        .transpose()?;
    let metrics = evaluate(&preds, &gold, &criteria)?;
    let (text, doc) = render_report(&metrics, manifest.as_ref());
    print!("{text}");
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| path.display().to_string())?;
    }
    Ok(0)
}

fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

fn cmd_export(args: ExportArgs) -> Result<u8> {
    let store = RecordStore::open(&args.store.store)?;
    let records = store.records()?;
    export(&records, args.format, &args.out)?;
    println!("{} records -> {}", records.len(), args.out.display());
    Ok(0)
}

fn cmd_stats(args: StoreArg) -> Result<u8> {
    let store = RecordStore::open(&args.store)?;
    print!("{}", stats_report(&store.records()?).render());
    Ok(0)
}

fn cmd_fixtures(cmd: FixturesCommand) -> Result<u8> {
    let FixturesCommand::Record { config, answers, out } = cmd;
    let mut cfg = PipelineConfig::load(&config)?;
    let target = out.or_else(|| cfg.backend.fixtures.clone()).context("no fixture path given or configured")?;
    let scratch = tempfile_dir()?;
    cfg.output_dir = scratch.clone();
    let (table, output) = record_fixtures(&cfg, load_answer_key(&answers)?)?;
    std::fs::remove_dir_all(&scratch).ok();
    std::fs::write(&target, table.to_json() + "\n").with_context(|| target.display().to_string())?;
    println!(
        "{} fixtures -> {} ({} records unified)",
        table.entries.len(),
        target.display(),
        output.manifest.counts.records_unified
    );
    Ok(0)
}

fn tempfile_dir() -> Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!("compass-record-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Export(a) => cmd_export(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Fixtures(c) => cmd_fixtures(c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
