//! Executable validation checks and the rollback controller.

mod checks;
mod mask;
mod rollback;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extract::PbRecord;

pub use checks::{CheckKind, CheckSpec, Severity, KNOWN_FIELDS};
pub use mask::{MaskError, OceanMask};
pub use rollback::{
    attempt_tag, execute_with_rollback, PipelineState, QuarantinedSubject, RollbackError, RollbackEvent, StepEntry,
    StepFailure, StepStatus, DEFAULT_MAX_ATTEMPTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub record_id: String,
    pub check_id: String,
    pub severity: Severity,
    pub outcome: Outcome,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CheckTally {
    pub pass: usize,
    pub fail: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub results: Vec<CheckResult>,
    pub summary: BTreeMap<String, CheckTally>,
}

impl ValidationReport {
    fn from_results(results: Vec<CheckResult>) -> Self {
        let mut summary: BTreeMap<String, CheckTally> = BTreeMap::new();
        for r in &results {
            let tally = summary.entry(r.check_id.clone()).or_default();
            match r.outcome {
                Outcome::Pass => tally.pass += 1,
                Outcome::Fail => tally.fail += 1,
            }
        }
        ValidationReport { results, summary }
    }

    pub fn merge(&mut self, other: ValidationReport) {
        let mut all = std::mem::take(&mut self.results);
        all.extend(other.results);
        *self = ValidationReport::from_results(all);
    }

    /// Records failing at least one fatal check.
    pub fn invalid_records(&self) -> BTreeSet<&str> {
        self.results
            .iter()
            .filter(|r| r.outcome == Outcome::Fail && r.severity == Severity::Fatal)
            .map(|r| r.record_id.as_str())
            .collect()
    }

    pub fn failures_for<'a>(&'a self, record_id: &'a str) -> impl Iterator<Item = &'a CheckResult> + 'a {
        self.results.iter().filter(move |r| r.record_id == record_id && r.outcome == Outcome::Fail)
    }
}

fn evaluate(record: &PbRecord, check: &CheckSpec, mask: &OceanMask) -> Result<(), String> {
    match &check.kind {
        CheckKind::Range { min, max, unit, .. } => {
            if &record.unit != unit {
                return Err(format!("unit `{}` is not the range unit `{unit}`", record.unit));
            }
            if !record.value.is_finite() || record.value < *min || record.value > *max {
                return Err(format!("value {} outside [{min}, {max}] {unit}", record.value));
            }
            Ok(())
        }
        CheckKind::GeoBounds { .. } => match (record.latitude, record.longitude) {
            (Some(lat), Some(lon)) if record.is_located() => {
                if mask.is_ocean(lat, lon) {
                    Ok(())
                } else {
                    Err(format!("({lat}, {lon}) falls on land"))
                }
            }
            _ => Err("no valid position to test".into()),
        },
        CheckKind::UnitWhitelist { allowed_units, .. } => {
            if allowed_units.iter().any(|u| u == &record.unit) {
                Ok(())
            } else {
                Err(format!("unit `{}` not in {allowed_units:?}", record.unit))
            }
        }
        CheckKind::RequiredFields { fields } => {
            let missing: Vec<&str> = fields
                .iter()
                .map(String::as_str)
                .filter(|f| match *f {
                    "measurement_type" => false,
                    "value" => !record.value.is_finite(),
                    "unit" => record.unit.trim().is_empty(),
                    "latitude" => record.latitude.is_none(),
                    "longitude" => record.longitude.is_none(),
                    "depth_m" => record.depth_m.is_none(),
                    "phase" => record.phase == crate::extract::Phase::Unknown,
                    "sample_date" => record.sample_date.is_none(),
                    "provenance" => record.provenance.is_empty(),
                    _ => true,
                })
                .collect();
            if missing.is_empty() {
                Ok(())
            } else {
                Err(format!("missing {}", missing.join(", ")))
            }
        }
        CheckKind::CoordinateSanity => match (record.latitude, record.longitude) {
            (Some(lat), Some(lon)) => {
                if lat.is_finite() && lon.is_finite() && lat.abs() <= 90.0 && lon.abs() <= 180.0 {
                    Ok(())
                } else {
                    Err(format!("({lat}, {lon}) out of bounds"))
                }
            }
            _ => Err("position unset".into()),
        },
    }
}

/// Runs every applicable check on every record. Type-restricted checks apply
/// only to records of that type; a check that cannot evaluate fails.
pub fn run_checks(records: &[PbRecord], checks: &[CheckSpec], mask: &OceanMask) -> ValidationReport {
    let results: Vec<CheckResult> = records
        .par_iter()
        .flat_map_iter(|record| {
            checks
                .iter()
                .filter(|c| c.kind.applies_to().is_none_or(|t| t == record.measurement_type))
                .map(|check| {
                    let (outcome, message) = match evaluate(record, check, mask) {
                        Ok(()) => (Outcome::Pass, String::new()),
                        Err(msg) => (Outcome::Fail, msg),
                    };
                    CheckResult {
                        record_id: record.record_id.clone(),
                        check_id: check.check_id.clone(),
                        severity: check.severity,
                        outcome,
                        message,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    ValidationReport::from_results(results)
}

/// Checks from every node on the tree, deduplicated by id, in tree order.
pub fn all_tree_checks(tree: &crate::knowledge_tree::KnowledgeTree) -> Vec<CheckSpec> {
    let mut seen = BTreeSet::new();
    tree.iter()
        .flat_map(|n| n.checks().cloned().collect::<Vec<_>>())
        .filter(|c| seen.insert(c.check_id.clone()))
        .collect()
}
