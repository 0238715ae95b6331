use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{MetricsReport, TaskMetrics, TypeCounts};
use crate::extract::MeasurementType;
use crate::pipeline::RunManifest;

/// JSON form of a rendered report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub tasks: BTreeMap<String, Option<TaskMetrics>>,
    pub per_paper_recall: Option<f64>,
    pub records_by_type: BTreeMap<MeasurementType, TypeCounts>,
    pub note: Option<String>,
    pub metrics: MetricsReport,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

/// Renders the three task rows and per-type record counts as fixed-width
/// text, plus the same content as JSON. Output depends only on the inputs.
pub fn render_report(metrics: &MetricsReport, manifest: Option<&RunManifest>) -> (String, ReportDocument) {
    let mut text = String::new();
    if let Some(m) = manifest {
        let _ = writeln!(text, "run {}  config {}", m.run_id, &m.config_digest[..m.config_digest.len().min(12)]);
        let _ = writeln!(
            text,
            "papers {} (target {}), target tables {}, records validated {}, quarantined {}, fused {}, rollbacks {}",
            m.counts.papers_seen,
            m.counts.papers_target,
            m.counts.tables_target,
            m.counts.records_validated,
            m.counts.records_quarantined,
            m.counts.records_fused,
            m.rollback_events
        );
        text.push('\n');
    }
    let _ = writeln!(text, "{:<24}{:>8}{:>8}{:>8}{:>8}", "task", "acc", "prec", "rec", "f1");
    let rows: [(&str, Option<TaskMetrics>); 3] = [
        ("paper classification", Some(metrics.paper_classification.metrics)),
        ("table classification", Some(metrics.table_classification.metrics)),
        ("extraction", metrics.extraction.as_ref().map(|e| e.metrics)),
    ];
    for (name, m) in &rows {
        match m {
            Some(m) => {
                let _ = writeln!(
                    text,
                    "{name:<24}{:>8}{:>8}{:>8}{:>8}",
                    cell(m.accuracy),
                    cell(Some(m.precision)),
                    cell(Some(m.recall)),
                    cell(Some(m.f1))
                );
            }
            None => {
                let _ = writeln!(text, "{name:<24}  no gold records");
            }
        }
    }

    let (per_paper_recall, records_by_type, note) = match &metrics.extraction {
        Some(e) => {
            let _ = writeln!(text, "per-paper recall {}", cell(e.per_paper_recall));
            let _ = writeln!(text, "\n{:<12}{:>8}{:>11}{:>9}", "type", "gold", "predicted", "matched");
            for (t, c) in &e.by_type {
                let _ = writeln!(text, "{:<12}{:>8}{:>11}{:>9}", t.as_str(), c.gold, c.predicted, c.matched);
            }
            (e.per_paper_recall, e.by_type.clone(), None)
        }
        None => (None, BTreeMap::new(), Some("no gold records".to_string())),
    };
    let doc = ReportDocument {
        run_id: manifest.map(|m| m.run_id.clone()),
        tasks: rows.iter().map(|(n, m)| (n.to_string(), *m)).collect(),
        per_paper_recall,
        records_by_type,
        note,
        metrics: metrics.clone(),
    };
    (text, doc)
}
