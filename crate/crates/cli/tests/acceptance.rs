//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines are always printed.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use compass_core::corpus::load_corpus;
use compass_core::evaluate::{score_classification, score_extraction, GoldSet, MatchCriteria, ReportDocument};
use compass_core::extract::{format_dms, parse_coordinate, Axis, CoordError};
use compass_core::harmonize::{
    load_external, merge_sources, ConversionKind, ConversionProposal, UnitError, UnitRegistry,
};
use compass_core::knowledge_tree::{load_tree, marine_pb_tree, marine_pb_tree_source, TreeError};
use compass_core::pipeline::RunManifest;
use compass_core::store::{load_csv, RECORDS_FILE};
use compass_core::validate::{all_tree_checks, run_checks, OceanMask};
use compass_core::{MeasurementType, PaperCategory, PbRecord, SourceKind};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn minicorpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/minicorpus")
}

fn compass(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_compass"))
        .args(args)
        .current_dir(minicorpus())
        .output()
        .map_err(|e| e.to_string())?;
    let code = out.status.code().unwrap_or(-1);
    if code == 1 {
        return Err(format!("compass {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok((code, String::from_utf8_lossy(&out.stdout).into_owned()))
}

fn mock_run(out: &Path, extra: &[&str]) -> Result<RunManifest, String> {
    let out_s = out.to_str().unwrap();
    let mut args = vec!["run", "--corpus", "papers", "--backend", "mock", "--fixtures", "fixtures.json", "--out", out_s];
    args.extend_from_slice(extra);
    compass(&args)?;
    let text = std::fs::read_to_string(out.join("manifest.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn gold() -> GoldSet {
    GoldSet::load(&minicorpus().join("gold.json")).expect("bundled gold set")
}

// 1. Bundled tree loads; mutated variants are rejected with the right error.
fn tree_integrity() -> Verdict {
    let started = Instant::now();
    let tree = marine_pb_tree();
    ensure((15..=25).contains(&tree.len()), format!("bundled tree has {} nodes", tree.len()))?;
    let doc: Value = serde_json::from_str(marine_pb_tree_source()).map_err(|e| e.to_string())?;
    let nodes = doc["nodes"].as_array().unwrap().clone();
    let root = doc["root"].as_str().unwrap().to_string();
    let ids: Vec<String> = nodes.iter().map(|n| n["id"].as_str().unwrap().to_string()).collect();
    let children: BTreeMap<String, Vec<String>> = nodes
        .iter()
        .map(|n| {
            let c = n["children"].as_array().map(|a| a.iter().map(|c| c.as_str().unwrap().to_string()).collect());
            (n["id"].as_str().unwrap().to_string(), c.unwrap_or_default())
        })
        .collect();
    let descendants = |id: &str| {
        let mut out = Vec::new();
        let mut stack = vec![id.to_string()];
        while let Some(cur) = stack.pop() {
            for c in &children[&cur] {
                out.push(c.clone());
                stack.push(c.clone());
            }
        }
        out
    };
    let non_root: Vec<usize> = (0..ids.len()).filter(|i| ids[*i] != root).collect();
    let mut rng = StdRng::seed_from_u64(1);
    let mut tally = [0usize; 3];
    for i in 0..100 {
        let mut variant = doc.clone();
        let vn = variant["nodes"].as_array_mut().unwrap();
        let k = non_root[rng.gen_range(0..non_root.len())];
        let kind = i % 3;
        let result = match kind {
            0 => {
                let mut j = rng.gen_range(0..ids.len());
                while j == k {
                    j = rng.gen_range(0..ids.len());
                }
                vn[k]["id"] = Value::from(ids[j].clone());
                let expected = ids[j].clone();
                match load_tree(&variant.to_string()) {
                    Err(TreeError::DuplicateId(id)) if id == expected => Ok(()),
                    other => Err(format!("duplicate `{expected}`: {:?}", other.map(|t| t.len()))),
                }
            }
            1 => {
                let below = descendants(&ids[k]);
                let target = if below.is_empty() { ids[k].clone() } else { below[rng.gen_range(0..below.len())].clone() };
                vn[k]["parent"] = Value::from(target.clone());
                match load_tree(&variant.to_string()) {
                    Err(TreeError::CycleDetected(_)) => Ok(()),
                    other => Err(format!("cycle {} -> {target}: {:?}", ids[k], other.map(|t| t.len()))),
                }
            }
            _ => {
                let missing = format!("missing_{i}");
                vn[k]["parent"] = Value::from(missing.clone());
                match load_tree(&variant.to_string()) {
                    Err(TreeError::DanglingParent { node, parent }) if node == ids[k] && parent == missing => Ok(()),
                    other => Err(format!("dangling parent of {}: {:?}", ids[k], other.map(|t| t.len()))),
                }
            }
        };
        result?;
        tally[kind] += 1;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} nodes; rejected {} duplicate, {} cycle, {} dangling variants in {:.0} ms",
        tree.len(),
        tally[0],
        tally[1],
        tally[2],
        elapsed.as_secs_f64() * 1e3
    ))
}

// 2. Mock run of the mini-corpus scores exactly 1 on every task.
fn mock_end_to_end() -> Verdict {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = mock_run(dir.path(), &[])?;
    let report = dir.path().join("report.json");
    compass(&["eval", "--gold", "gold.json", "--pred", dir.path().to_str().unwrap(), "--json", report.to_str().unwrap()])?;
    let elapsed = started.elapsed();
    let doc: ReportDocument =
        serde_json::from_str(&std::fs::read_to_string(&report).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(manifest.counts.papers_seen == 12, format!("{} papers", manifest.counts.papers_seen))?;
    ensure(gold().gold_records.len() == 40, "gold set is not 40 records")?;
    for (task, m) in &doc.tasks {
        let m = m.ok_or_else(|| format!("{task}: not scored"))?;
        ensure((m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0), format!("{task}: {m:?}"))?;
    }
    ensure(doc.tasks.len() == 3, "expected three tasks")?;
    ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("P = R = F1 = 1.000 on 3 tasks, 40/40 records, {:.2} s", elapsed.as_secs_f64()))
}

// 3. Fail-each-request-once faults give a byte-identical store.
fn rollback_equivalence() -> Verdict {
    let (clean, faulty) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let base = mock_run(clean.path(), &[])?;
    let m = mock_run(faulty.path(), &["--inject-faults", "garbage"])?;
    for f in [RECORDS_FILE, "records.idx.json"] {
        let a = std::fs::read(clean.path().join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(faulty.path().join(f)).map_err(|e| e.to_string())?;
        ensure(a == b, format!("{f} differs"))?;
    }
    ensure(m.rollback_events >= 1, "no rollback events")?;
    ensure(m.max_attempts_used <= 2, format!("{} attempts used", m.max_attempts_used))?;
    ensure(m.counts == base.counts, "counts differ")?;
    Ok(format!(
        "store identical; {} rollback events ({} resolved), max attempts used {}",
        m.rollback_events, m.rollback_resolved, m.max_attempts_used
    ))
}

fn brute_force_matching(preds: &[PbRecord], golds: &[PbRecord], c: &MatchCriteria) -> usize {
    fn go(i: usize, preds: &[PbRecord], golds: &[PbRecord], used: &mut Vec<bool>, c: &MatchCriteria) -> usize {
        if i == preds.len() {
            return 0;
        }
        let mut best = go(i + 1, preds, golds, used, c);
        for j in 0..golds.len() {
            if !used[j] && c.compatible(&preds[i], &golds[j]) {
                used[j] = true;
                best = best.max(1 + go(i + 1, preds, golds, used, c));
                used[j] = false;
            }
        }
        best
    }
    go(0, preds, golds, &mut vec![false; golds.len()], c)
}

fn random_record(template: &PbRecord, rng: &mut StdRng, id: usize) -> PbRecord {
    let mut r = template.clone();
    r.record_id = format!("x{id}");
    r.measurement_type = [MeasurementType::PbConc, MeasurementType::R206_207][rng.gen_range(0..2)];
    r.value = [1.0, 1.0000005, 1.01, 2.0][rng.gen_range(0..4)];
    r.latitude = [Some(10.0), Some(10.005), Some(10.5), None][rng.gen_range(0..4)];
    r.longitude = Some(-30.0);
    r.depth_m = [Some(10.0), Some(10.5), Some(12.0), None][rng.gen_range(0..4)];
    r.provenance[0].paper_id = ["A", "B"][rng.gen_range(0..2)].to_string();
    r
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

// 4. Scoring matches brute-force oracles.
fn metrics_oracle() -> Verdict {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(4);
    let labels: Vec<PaperCategory> =
        compass_core::classify::Label::ALL.iter().copied().chain([PaperCategory::Unclassified]).collect();
    let criteria = MatchCriteria::default();
    let template = gold().gold_records[0].clone();
    for case in 0..1000 {
        let n = rng.gen_range(0..15);
        let gold: BTreeMap<String, PaperCategory> =
            (0..n).map(|i| (format!("p{i}"), labels[rng.gen_range(0..labels.len())])).collect();
        let pred: BTreeMap<String, PaperCategory> = gold
            .keys()
            .map(|k| (k.clone(), if rng.gen_bool(0.5) { gold[k] } else { labels[rng.gen_range(0..labels.len())] }))
            .collect();
        let score = score_classification(&pred, &gold, &PaperCategory::TARGETS).map_err(|e| e.to_string())?;
        let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let (mut correct, mut tp, mut pp, mut gp) = (0, 0, 0, 0);
        for (k, g) in &gold {
            let p = pred[k];
            let label = |l: PaperCategory| serde_json::to_value(l).unwrap().as_str().unwrap().to_string();
            *confusion.entry(label(*g)).or_default().entry(label(p)).or_default() += 1;
            correct += usize::from(p == *g);
            let is_pos = |l: PaperCategory| PaperCategory::TARGETS.contains(&l);
            pp += usize::from(is_pos(p));
            gp += usize::from(is_pos(*g));
            tp += usize::from(is_pos(p) && p == *g);
        }
        let (pr, rc) = (ratio(tp, pp), ratio(tp, gp));
        ensure(score.confusion == confusion, format!("case {case}: confusion differs"))?;
        ensure(score.metrics.accuracy == Some(ratio(correct, n)), format!("case {case}: accuracy"))?;
        ensure((score.metrics.precision, score.metrics.recall, score.metrics.f1) == (pr, rc, f1(pr, rc)), format!("case {case}: p/r/f1"))?;

        let preds: Vec<PbRecord> = (0..rng.gen_range(0..7)).map(|i| random_record(&template, &mut rng, i)).collect();
        let golds: Vec<PbRecord> = (0..rng.gen_range(0..7)).map(|i| random_record(&template, &mut rng, 100 + i)).collect();
        let ex = score_extraction(&preds, &golds, &criteria);
        let tp = brute_force_matching(&preds, &golds, &criteria);
        let (pr, rc) = (ratio(tp, preds.len()), ratio(tp, golds.len()));
        ensure(ex.true_positives == tp, format!("case {case}: matching {} vs oracle {tp}", ex.true_positives))?;
        ensure((ex.metrics.precision, ex.metrics.recall, ex.metrics.f1) == (pr, rc, f1(pr, rc)), format!("case {case}: extraction p/r/f1"))?;
        for (paper, recall) in &ex.recall_by_paper {
            let mine = |rs: &[PbRecord]| rs.iter().filter(|r| r.paper_id() == paper).cloned().collect::<Vec<_>>();
            let (pp, gg) = (mine(&preds), mine(&golds));
            ensure(*recall == ratio(brute_force_matching(&pp, &gg, &criteria), gg.len()), format!("case {case}: recall of {paper}"))?;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("1000 randomized cases equal to the oracles in {:.2} s", elapsed.as_secs_f64()))
}

// 5. Molar-mass factor, registry round trips, dimensional gate.
fn unit_conversion() -> Verdict {
    let reg = UnitRegistry::bundled();
    let c = reg.conversion_to_canonical("ng/kg", MeasurementType::PbConc).map_err(|e| e.to_string())?;
    let oracle = 1000.0 / 207.2;
    ensure(((c.factor - oracle) / oracle).abs() <= 1e-9, format!("ng/kg factor {}", c.factor))?;

    let families: [(MeasurementType, &[&str]); 3] = [
        (
            MeasurementType::PbConc,
            &["pmol/kg", "nmol/kg", "fmol/kg", "umol/kg", "pmol/L", "nmol/L", "pM", "nM", "fM", "ng/kg", "ug/kg", "pg/kg", "ng/L", "ng/g", "nmol/m3", "pmol kg-1"],
        ),
        (
            MeasurementType::Pb210Conc,
            &["mBq/m3", "Bq/m3", "mBq/L", "Bq/L", "Bq/kg", "mBq/kg", "dpm/100kg", "dpm/100L", "dpm/kg", "dpm/m3", "dpm/L"],
        ),
        (MeasurementType::R206_207, &["ratio", "dimensionless", "-", "atom ratio"]),
    ];
    let mut pairs = 0;
    for (mtype, units) in families {
        for a in units {
            for b in units {
                let there = reg.conversion_between(a, b, mtype).map_err(|e| format!("{a} -> {b}: {e}"))?;
                let back = reg.conversion_between(b, a, mtype).map_err(|e| format!("{b} -> {a}: {e}"))?;
                for x in [1e-6, 0.37, 1.0, 48.2, 12345.678] {
                    let y = back.apply(there.apply(x));
                    ensure((y - x).abs() <= 1e-12 * x.abs(), format!("{a} -> {b} -> {a}: {x} became {y}"))?;
                    ensure((there.invert(there.apply(x)) - x).abs() <= 1e-12 * x.abs(), format!("{a} -> {b} inverse"))?;
                }
                pairs += 1;
            }
        }
    }

    let conc = ["pmol/kg", "ng/L", "nM", "ng/kg", "pg/g", "ppt", "ug/L", "fmol/kg", "pmol/L", "mol/m3"];
    let act = ["dpm/100kg", "mBq/m3", "Bq/kg", "dpm/L", "mBq/L", "Bq/m3", "dpm/m3", "Ci/L", "dps/kg", "Bq/L"];
    let mut proposals = Vec::new();
    for (i, u) in act.iter().enumerate() {
        // Activity unit offered as a concentration, honestly and dishonestly labeled.
        let dim = if i % 2 == 0 { "activity" } else { "concentration" };
        proposals.push((MeasurementType::PbConc, *u, dim));
        proposals.push((MeasurementType::R208_206, *u, if i % 2 == 0 { "activity" } else { "ratio" }));
    }
    for (i, u) in conc.iter().enumerate() {
        let dim = if i % 2 == 0 { "concentration" } else { "activity" };
        proposals.push((MeasurementType::Pb210Conc, *u, dim));
        proposals.push((MeasurementType::R206_204, *u, if i % 2 == 0 { "concentration" } else { "ratio" }));
        proposals.push((MeasurementType::R206_207, *u, "ratio"));
    }
    ensure(proposals.len() == 50, format!("{} adversarial proposals", proposals.len()))?;
    let mut rejected = 0;
    for (mtype, unit, dim) in &proposals {
        let p = ConversionProposal {
            from_unit: unit.to_string(),
            to_unit: reg.canonical_unit(*mtype).to_string(),
            from_dimension: dim.to_string(),
            kind: ConversionKind::LinearFactor,
            factor: 1.0,
            offset: 0.0,
        };
        match reg.accept_proposal(&p, *mtype) {
            Err(UnitError::DimensionalMismatch { .. }) => rejected += 1,
            other => return Err(format!("{unit} as {dim} for {mtype}: {other:?}")),
        }
    }
    Ok(format!("factor within 1e-9; {pairs} unit pairs round-trip; {rejected}/50 mismatches rejected"))
}

// 6. DMS round trips and the fixed cases.
fn coordinate_parser() -> Verdict {
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (lat, lon) = (rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0));
        let text = format_dms(lat, lon);
        let p = parse_coordinate(&text).map_err(|e| format!("{text}: {e}"))?;
        let (plat, plon) = (p.latitude.ok_or("no latitude")?, p.longitude.ok_or("no longitude")?);
        worst = worst.max((plat - lat).abs()).max((plon - lon).abs());
    }
    ensure(worst <= 1e-9, format!("worst round-trip error {worst:e}"))?;
    let lat = parse_coordinate("36°30'N").map_err(|e| e.to_string())?;
    ensure(lat.latitude == Some(36.5) && lat.longitude.is_none(), format!("36°30'N gave {lat:?}"))?;
    let lon = parse_coordinate("123°15.6'E").map_err(|e| e.to_string())?;
    ensure(lon.longitude == Some(123.26) && lon.latitude.is_none(), format!("123°15.6'E gave {lon:?}"))?;
    match parse_coordinate("95°") {
        Err(CoordError::OutOfRange { axis: Axis::Latitude, .. }) => {}
        other => return Err(format!("95° gave {other:?}")),
    }
    Ok(format!("10000 round trips, worst error {worst:.1e}°; fixed cases exact"))
}

// 7. Planted violations are caught; the clean set passes.
fn validation_coverage() -> Verdict {
    let tree = marine_pb_tree();
    let checks = all_tree_checks(&tree);
    let mask = OceanMask::bundled();
    let clean = gold().gold_records;
    ensure(clean.len() == 40, "clean set is not 40 records")?;
    let report = run_checks(&clean, &checks, &mask);
    ensure(report.invalid_records().is_empty(), format!("false quarantines: {:?}", report.invalid_records()))?;

    let land = [(40.0, -100.0), (48.0, 10.0), (-25.0, 135.0), (0.5, 20.5), (60.5, 100.5), (35.5, 105.5), (-10.5, -55.5)];
    let mut planted = Vec::new();
    let pick = |t: MeasurementType, k: usize| clean.iter().filter(|r| r.measurement_type == t).nth(k).cloned().unwrap();
    for k in 0..7 {
        let mut r = pick(if k % 2 == 0 { MeasurementType::PbConc } else { MeasurementType::Pb210Conc }, k);
        r.record_id = format!("neg{k}");
        r.value = -r.value.abs();
        planted.push(r);
    }
    for (k, (lat, lon)) in land.iter().enumerate() {
        ensure(!mask.is_ocean(*lat, *lon), format!("{lat},{lon} is not land in the mask"))?;
        let mut r = clean[k * 5].clone();
        r.record_id = format!("land{k}");
        (r.latitude, r.longitude) = (Some(*lat), Some(*lon));
        planted.push(r);
    }
    for (k, (t, v)) in [
        (MeasurementType::R206_207, 2.5),
        (MeasurementType::R206_207, 0.4),
        (MeasurementType::R208_206, 3.1),
        (MeasurementType::R208_206, 1.2),
        (MeasurementType::R206_204, 30.0),
        (MeasurementType::R206_204, 9.0),
    ]
    .into_iter()
    .enumerate()
    {
        let mut r = pick(t, k);
        r.record_id = format!("ratio{k}");
        r.value = v;
        planted.push(r);
    }
    ensure(planted.len() == 20, "planted set is not 20 records")?;
    let mut all = clean.clone();
    all.extend(planted.iter().cloned());
    let report = run_checks(&all, &checks, &mask);
    let caught = report.invalid_records();
    let expected: BTreeSet<&str> = planted.iter().map(|r| r.record_id.as_str()).collect();
    ensure(caught == expected, format!("caught {caught:?}"))?;
    Ok(format!("{}/20 planted violations quarantined, 0/40 clean records", caught.len()))
}

// 8. Every exported record points at an existing (paper, table, row).
fn provenance_completeness() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    mock_run(dir.path(), &[])?;
    let csv = dir.path().join("export.csv");
    compass(&["export", "--store", dir.path().to_str().unwrap(), "--format", "csv", "--out", csv.to_str().unwrap()])?;
    let records = load_csv(&csv).map_err(|e| e.to_string())?;
    let corpus = load_corpus(&minicorpus().join("papers")).map_err(|e| e.to_string())?;
    ensure(!records.is_empty(), "nothing exported")?;
    let mut resolved = 0;
    for r in &records {
        for s in &r.provenance {
            let paper = corpus.papers.get(&s.paper_id).ok_or(format!("{}: no paper {}", r.record_id, s.paper_id))?;
            let table = paper.table(&s.table_id).ok_or(format!("{}: no table {}", r.record_id, s.table_id))?;
            ensure(s.row_index < table.data_rows.len(), format!("{}: row {} out of bounds", r.record_id, s.row_index))?;
            ensure(table.column_headers().contains(&s.column_header), format!("{}: no column {}", r.record_id, s.column_header))?;
        }
        resolved += 1;
    }
    Ok(format!("{resolved}/{} exported records resolve", records.len()))
}

// 9. Fusion with the structured fixture removes exactly the 5 overlaps.
fn dedup_fusion() -> Verdict {
    let extracted = gold().gold_records;
    let structured = load_external(&minicorpus().join("external/structured.json"), UnitRegistry::bundled()).map_err(|e| e.to_string())?;
    let total = extracted.len() + structured.records.len();
    let unified = merge_sources(extracted, std::slice::from_ref(&structured));
    ensure(unified.records.len() == total - 5, format!("{} survivors of {total}", unified.records.len()))?;
    ensure(unified.merge_log.len() == 5, format!("{} merges", unified.merge_log.len()))?;
    for m in &unified.merge_log {
        ensure(m.survivor_source == SourceKind::Structured, format!("survivor {} is {:?}", m.survivor_record_id, m.survivor_source))?;
        ensure(m.removed_source == SourceKind::Extracted, "removed record is not extracted")?;
    }
    let again = merge_sources(unified.records.clone(), &[]);
    ensure(again.records == unified.records && again.merge_log.is_empty(), "merge is not idempotent")?;
    Ok(format!("{} survivors of {total}; 5 structured survivors; idempotent", unified.records.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("knowledge tree integrity", tree_integrity),
        ("mock end-to-end exactness", mock_end_to_end),
        ("rollback equivalence", rollback_equivalence),
        ("metrics oracle", metrics_oracle),
        ("unit conversion", unit_conversion),
        ("coordinate parser", coordinate_parser),
        ("validation coverage", validation_coverage),
        ("provenance completeness", provenance_completeness),
        ("dedup and fusion", dedup_fusion),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match verdict {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
