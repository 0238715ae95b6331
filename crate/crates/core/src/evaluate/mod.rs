//! Scoring against gold annotations: paper classification, table
//! classification and end-to-end extraction.

mod matching;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{table_subject, Label, PaperCategory, TableCategory};
use crate::extract::{MeasurementType, PbRecord, SourceKind};
use crate::harmonize::{COORD_TOL_DEG, DEPTH_TOL_M, VALUE_REL_TOL};

pub use matching::maximum_matching;
pub use report::{render_report, ReportDocument};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction and gold keys differ: {missing} missing, {extra} extra (first: {example})")]
    KeyMismatch { missing: usize, extra: usize, example: String },
    #[error("invalid gold set: {0}")]
    InvalidGold(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Annotations for a benchmark corpus. Table keys are "paper_id/table_id".
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GoldSet {
    pub paper_labels: BTreeMap<String, PaperCategory>,
    pub table_labels: BTreeMap<String, TableCategory>,
    pub gold_records: Vec<PbRecord>,
}

impl GoldSet {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let gold: GoldSet = read_json(path)?;
        gold.check()?;
        Ok(gold)
    }

    /// Every gold record must sit in a table labeled with a target category.
    pub fn check(&self) -> Result<(), EvalError> {
        for r in &self.gold_records {
            let key = table_subject(r.paper_id(), &r.source().table_id);
            match self.table_labels.get(&key) {
                Some(label) if label.is_target() => {}
                Some(label) => {
                    return Err(EvalError::InvalidGold(format!("{} sits in {key} labeled {}", r.record_id, label.label())))
                }
                None => return Err(EvalError::InvalidGold(format!("{} sits in unlabeled table {key}", r.record_id))),
            }
        }
        Ok(())
    }
}

/// What a pipeline run predicted, in the same keying as [`GoldSet`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Predictions {
    pub paper_labels: BTreeMap<String, PaperCategory>,
    pub table_labels: BTreeMap<String, TableCategory>,
    pub records: Vec<PbRecord>,
}

impl Predictions {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        read_json(path)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, EvalError> {
    let io = |reason: String| EvalError::Io { path: path.display().to_string(), reason };
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| io(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCriteria {
    pub value_rel_tol: f64,
    pub coord_tol_deg: f64,
    pub depth_tol_m: f64,
}

impl Default for MatchCriteria {
    fn default() -> Self {
        MatchCriteria { value_rel_tol: VALUE_REL_TOL, coord_tol_deg: COORD_TOL_DEG, depth_tol_m: DEPTH_TOL_M }
    }
}

impl MatchCriteria {
    fn within(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() <= tol,
            _ => false,
        }
    }

    /// Same paper, same type, and value, position and depth within tolerance.
    pub fn compatible(&self, a: &PbRecord, b: &PbRecord) -> bool {
        a.measurement_type == b.measurement_type
            && a.paper_id() == b.paper_id()
            && (a.value - b.value).abs() <= self.value_rel_tol * a.value.abs().max(b.value.abs())
            && Self::within(a.latitude, b.latitude, self.coord_tol_deg)
            && Self::within(a.longitude, b.longitude, self.coord_tol_deg)
            && Self::within(a.depth_m, b.depth_m, self.depth_tol_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    /// Absent for extraction, which has no true negatives.
    pub accuracy: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Rows are gold labels, columns predicted labels.
pub type ConfusionMatrix = BTreeMap<String, BTreeMap<String, usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScore {
    pub metrics: TaskMetrics,
    pub support: usize,
    pub confusion: ConfusionMatrix,
}

/// Accuracy over all items; precision and recall pooled over the positive
/// labels. A prediction is a true positive when it is a positive label equal
/// to the gold label.
pub fn score_classification<L: Label + Ord>(
    predictions: &BTreeMap<String, L>,
    gold: &BTreeMap<String, L>,
    positive: &[L],
) -> Result<ClassificationScore, EvalError> {
    let missing: Vec<&String> = gold.keys().filter(|k| !predictions.contains_key(*k)).collect();
    let extra: Vec<&String> = predictions.keys().filter(|k| !gold.contains_key(*k)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        let example = missing.first().or(extra.first()).map(|s| s.to_string()).unwrap_or_default();
        return Err(EvalError::KeyMismatch { missing: missing.len(), extra: extra.len(), example });
    }
    let (mut correct, mut tp, mut pred_pos, mut gold_pos) = (0, 0, 0, 0);
    let mut confusion = ConfusionMatrix::new();
    for (id, g) in gold {
        let p = predictions[id];
        correct += usize::from(p == *g);
        let (pp, gp) = (positive.contains(&p), positive.contains(g));
        pred_pos += usize::from(pp);
        gold_pos += usize::from(gp);
        tp += usize::from(pp && p == *g);
        *confusion.entry(g.label().to_string()).or_default().entry(p.label().to_string()).or_default() += 1;
    }
    let (precision, recall) = (ratio(tp, pred_pos), ratio(tp, gold_pos));
    Ok(ClassificationScore {
        metrics: TaskMetrics { accuracy: Some(ratio(correct, gold.len())), precision, recall, f1: f1_score(precision, recall) },
        support: gold.len(),
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub gold: usize,
    pub predicted: usize,
    pub matched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionScore {
    pub metrics: TaskMetrics,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    /// Mean over papers with at least one gold record.
    pub per_paper_recall: Option<f64>,
    pub recall_by_paper: BTreeMap<String, f64>,
    pub by_type: BTreeMap<MeasurementType, TypeCounts>,
    /// (predicted record id, gold record id) pairs of the matching.
    pub matches: Vec<(String, String)>,
}

/// One-to-one maximum matching between predicted and gold records under
/// `criteria`; the matching size is the true-positive count.
pub fn score_extraction(predicted: &[PbRecord], gold: &[PbRecord], criteria: &MatchCriteria) -> ExtractionScore {
    let mut parts: BTreeMap<(&str, MeasurementType), (Vec<&PbRecord>, Vec<&PbRecord>)> = BTreeMap::new();
    for p in predicted {
        parts.entry((p.paper_id(), p.measurement_type)).or_default().0.push(p);
    }
    for g in gold {
        parts.entry((g.paper_id(), g.measurement_type)).or_default().1.push(g);
    }
    let mut matches = Vec::new();
    let mut matched_by_paper: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_type: BTreeMap<MeasurementType, TypeCounts> =
        MeasurementType::ALL.iter().map(|t| (*t, TypeCounts { gold: 0, predicted: 0, matched: 0 })).collect();
    for ((paper, mtype), (mut preds, mut golds)) in parts {
        preds.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        golds.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        let adj: Vec<Vec<usize>> = preds
            .iter()
            .map(|p| golds.iter().enumerate().filter(|(_, g)| criteria.compatible(p, g)).map(|(i, _)| i).collect())
            .collect();
        let assignment = maximum_matching(&adj, golds.len());
        let n = assignment.iter().flatten().count();
        for (pi, gi) in assignment.iter().enumerate() {
            if let Some(gi) = gi {
                matches.push((preds[pi].record_id.clone(), golds[*gi].record_id.clone()));
            }
        }
        *matched_by_paper.entry(paper).or_default() += n;
        let counts = by_type.get_mut(&mtype).expect("all types present");
        counts.gold += golds.len();
        counts.predicted += preds.len();
        counts.matched += n;
    }
    matches.sort();

    let mut gold_by_paper: BTreeMap<&str, usize> = BTreeMap::new();
    for g in gold {
        *gold_by_paper.entry(g.paper_id()).or_default() += 1;
    }
    let recall_by_paper: BTreeMap<String, f64> = gold_by_paper
        .iter()
        .map(|(paper, n)| (paper.to_string(), ratio(matched_by_paper.get(paper).copied().unwrap_or(0), *n)))
        .collect();
    let per_paper_recall =
        (!recall_by_paper.is_empty()).then(|| recall_by_paper.values().sum::<f64>() / recall_by_paper.len() as f64);

    let tp = matches.len();
    let (precision, recall) = (ratio(tp, predicted.len()), ratio(tp, gold.len()));
    ExtractionScore {
        metrics: TaskMetrics { accuracy: None, precision, recall, f1: f1_score(precision, recall) },
        true_positives: tp,
        predicted: predicted.len(),
        gold: gold.len(),
        per_paper_recall,
        recall_by_paper,
        by_type,
        matches,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub paper_classification: ClassificationScore,
    pub table_classification: ClassificationScore,
    /// Absent when the gold set has no records.
    pub extraction: Option<ExtractionScore>,
}

/// Fills labels the pipeline never produced (e.g. papers dropped by keyword
/// search, tables of non-target papers) with `Unclassified`.
pub fn fill_missing<L: Label>(predictions: &mut BTreeMap<String, L>, gold: &BTreeMap<String, L>) {
    for key in gold.keys() {
        predictions.entry(key.clone()).or_insert(L::UNCLASSIFIED);
    }
}

/// Scores all three tasks. Only records extracted from papers take part in
/// extraction scoring; fused external records are ignored.
pub fn evaluate(predictions: &Predictions, gold: &GoldSet, criteria: &MatchCriteria) -> Result<MetricsReport, EvalError> {
    let paper_classification =
        score_classification(&predictions.paper_labels, &gold.paper_labels, &PaperCategory::TARGETS)?;
    let table_classification =
        score_classification(&predictions.table_labels, &gold.table_labels, &TableCategory::TARGETS)?;
    let extraction = (!gold.gold_records.is_empty()).then(|| {
        let extracted: Vec<PbRecord> =
            predictions.records.iter().filter(|r| r.source_kind() == SourceKind::Extracted).cloned().collect();
        score_extraction(&extracted, &gold.gold_records, criteria)
    });
    Ok(MetricsReport { paper_classification, table_classification, extraction })
}

/// Paper ids with at least one gold record.
pub fn papers_with_gold(gold: &GoldSet) -> BTreeSet<String> {
    gold.gold_records.iter().map(|r| r.paper_id().to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{Phase, Provenance};

    fn labels(xs: &[(&str, TableCategory)]) -> BTreeMap<String, TableCategory> {
        xs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn hand_counted_confusion() {
        use TableCategory::*;
        let gold = labels(&[
            ("a", TargetPbConc), ("b", TargetPbConc), ("c", Target210Pb), ("d", NonTarget), ("e", NonTarget),
            ("f", NonTarget), ("g", NonTarget), ("h", NonTarget), ("i", NonTarget), ("j", NonTarget),
        ]);
        let mut pred = gold.clone();
        pred.insert("b".into(), NonTarget);
        pred.insert("c".into(), Unclassified);
        let s = score_classification(&pred, &gold, &TableCategory::TARGETS).unwrap();
        assert_eq!(s.metrics.accuracy, Some(0.8));
        assert_eq!(s.metrics.precision, 1.0);
        assert!((s.metrics.recall - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.metrics.f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spec_style_counts() {
        // 3 gold positives, 2 predicted positives, both correct, 8 of 10 right
        use TableCategory::*;
        let gold = labels(&[
            ("a", TargetPbConc), ("b", Target210Pb), ("c", TargetIsotopeRatios), ("d", NonTarget), ("e", NonTarget),
            ("f", NonTarget), ("g", NonTarget), ("h", NonTarget), ("i", NonTarget), ("j", NonTarget),
        ]);
        let mut pred = gold.clone();
        pred.insert("c".into(), NonTarget);
        pred.insert("j".into(), Unclassified);
        let s = score_classification(&pred, &gold, &TableCategory::TARGETS).unwrap();
        assert_eq!(s.metrics.accuracy, Some(0.8));
        assert_eq!(s.metrics.precision, 1.0);
        assert!((s.metrics.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.metrics.f1 - 0.8).abs() < 1e-12);
        assert_eq!(s.confusion["Target Pb isotope ratios"]["Non-target"], 1);
    }

    #[test]
    fn all_unclassified() {
        let gold = labels(&[("a", TableCategory::TargetPbConc), ("b", TableCategory::NonTarget)]);
        let pred = labels(&[("a", TableCategory::Unclassified), ("b", TableCategory::Unclassified)]);
        let m = score_classification(&pred, &gold, &TableCategory::TARGETS).unwrap().metrics;
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn key_mismatch() {
        let gold = labels(&[("a", TableCategory::NonTarget)]);
        let pred = labels(&[("b", TableCategory::NonTarget)]);
        assert!(matches!(
            score_classification(&pred, &gold, &TableCategory::TARGETS),
            Err(EvalError::KeyMismatch { missing: 1, extra: 1, .. })
        ));
    }

    fn rec(id: &str, paper: &str, value: f64) -> PbRecord {
        PbRecord {
            record_id: id.into(),
            measurement_type: MeasurementType::PbConc,
            value,
            unit: "pmol/kg".into(),
            latitude: Some(10.0),
            longitude: Some(20.0),
            depth_m: Some(5.0),
            phase: Phase::Dissolved,
            sample_date: None,
            provenance: vec![Provenance {
                source_kind: SourceKind::Extracted,
                paper_id: paper.into(),
                doi: None,
                table_id: "T1".into(),
                row_index: 0,
                column_header: "Pb".into(),
                source_uri: String::new(),
            }],
            flags: Default::default(),
        }
    }

    #[test]
    fn duplicate_prediction_costs_precision_only() {
        let gold: Vec<PbRecord> = (0..40).map(|i| rec(&format!("g{i}"), "P", 1.0 + i as f64)).collect();
        let mut pred: Vec<PbRecord> = gold.iter().map(|g| PbRecord { record_id: format!("p{}", g.record_id), ..g.clone() }).collect();
        let s = score_extraction(&pred, &gold, &MatchCriteria::default());
        assert_eq!((s.metrics.precision, s.metrics.recall), (1.0, 1.0));
        pred.push(PbRecord { record_id: "dup".into(), ..pred[0].clone() });
        let s = score_extraction(&pred, &gold, &MatchCriteria::default());
        assert_eq!(s.metrics.precision, 40.0 / 41.0);
        assert_eq!(s.metrics.recall, 1.0);
        assert_eq!(s.per_paper_recall, Some(1.0));
    }

    #[test]
    fn value_tolerance_edge_and_paper_partition() {
        let gold = vec![rec("g", "P", 100.0)];
        let s = score_extraction(&[rec("p", "P", 100.1)], &gold, &MatchCriteria::default());
        assert_eq!(s.true_positives, 0);
        let s = score_extraction(&[rec("p", "Q", 100.0)], &gold, &MatchCriteria::default());
        assert_eq!(s.true_positives, 0);
        assert_eq!(s.recall_by_paper["P"], 0.0);
    }
}
