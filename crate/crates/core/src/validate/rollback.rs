//! Subtask state log and the rollback controller.
//!
//! Every backend-dependent subtask runs through [`execute_with_rollback`]. Each
//! attempt appends one log entry that starts pending and is closed exactly once
//! as done or failed. A failed attempt records a [`RollbackEvent`] and the same
//! input is re-executed; after `max_attempts` the subject is quarantined and the
//! failed output is withheld from downstream stages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::json_digest;
use crate::gateway::{GatewayError, NONCE_SEPARATOR};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEntry {
    pub step_id: String,
    pub subject_id: String,
    pub attempt: u32,
    pub input_digest: String,
    pub output_digest: Option<String>,
    status: StepStatus,
}

impl StepEntry {
    pub fn status(&self) -> StepStatus {
        self.status
    }

    fn close(&mut self, status: StepStatus, output_digest: Option<String>) {
        assert_eq!(self.status, StepStatus::Pending, "step entries are closed once");
        assert_ne!(status, StepStatus::Pending);
        self.status = status;
        self.output_digest = output_digest;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollbackEvent {
    pub step_id: String,
    pub subject_id: String,
    pub attempt: u32,
    pub reason: String,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PipelineState {
    pub entries: Vec<StepEntry>,
    pub rollback_events: Vec<RollbackEvent>,
    pub quarantined_subjects: Vec<QuarantinedSubject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedSubject {
    pub step_id: String,
    pub subject_id: String,
    pub reason: String,
}

impl PipelineState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends another log (e.g. from a worker) after this one.
    pub fn absorb(&mut self, other: PipelineState) {
        self.entries.extend(other.entries);
        self.rollback_events.extend(other.rollback_events);
        self.quarantined_subjects.extend(other.quarantined_subjects);
    }

    /// Largest attempt count used by any (step, subject).
    pub fn max_attempts_used(&self) -> u32 {
        self.entries.iter().map(|e| e.attempt).max().unwrap_or(0)
    }

    pub fn completed(&self) -> impl Iterator<Item = &StepEntry> {
        self.entries.iter().filter(|e| e.status == StepStatus::Done)
    }
}

/// Why one attempt failed.
#[derive(Debug, Clone, PartialEq)]
pub enum StepFailure<T> {
    /// The model reply could not be parsed into the stage's shape.
    Unparseable(String),
    /// Output parsed but failed validation; `partial` is what the attempt produced.
    Invalid { partial: T, reason: String },
    /// Backend gave up; not retried here (the gateway already retried).
    Backend(GatewayError),
}

impl<T> StepFailure<T> {
    /// Carries the failure over to a step with a different output type.
    pub fn map_partial<U>(self, f: impl FnOnce(T) -> U) -> StepFailure<U> {
        match self {
            StepFailure::Unparseable(r) => StepFailure::Unparseable(r),
            StepFailure::Invalid { partial, reason } => StepFailure::Invalid { partial: f(partial), reason },
            StepFailure::Backend(e) => StepFailure::Backend(e),
        }
    }

    fn reason(&self) -> String {
        match self {
            StepFailure::Unparseable(r) => format!("unparseable output: {r}"),
            StepFailure::Invalid { reason, .. } => format!("validation failed: {reason}"),
            StepFailure::Backend(e) => e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RollbackError<T> {
    #[error("subject quarantined after {attempts} attempts: {reason}")]
    QuarantinedSubject { attempts: u32, reason: String, last_partial: Option<T> },
    #[error("backend failure: {0}")]
    Backend(GatewayError),
}

/// Request tag for an attempt: the base tag, plus a nonce on re-executions.
pub fn attempt_tag(base: &str, attempt: u32) -> String {
    if attempt <= 1 {
        base.to_string()
    } else {
        format!("{base}{NONCE_SEPARATOR}{attempt}")
    }
}

/// Runs `step` until it succeeds or `max_attempts` attempts have failed.
/// `step` receives the 1-based attempt number.
pub fn execute_with_rollback<T, F>(
    state: &mut PipelineState,
    step_id: &str,
    subject_id: &str,
    input_digest: &str,
    max_attempts: u32,
    mut step: F,
) -> Result<T, RollbackError<T>>
where
    T: Serialize,
    F: FnMut(u32) -> Result<T, StepFailure<T>>,
{
    let max_attempts = max_attempts.max(1);
    let first_event = state.rollback_events.len();
    let mut last_reason = String::new();
    let mut last_partial = None;
    for attempt in 1..=max_attempts {
        state.entries.push(StepEntry {
            step_id: step_id.to_string(),
            subject_id: subject_id.to_string(),
            attempt,
            input_digest: input_digest.to_string(),
            output_digest: None,
            status: StepStatus::Pending,
        });
        let entry = state.entries.len() - 1;
        match step(attempt) {
            Ok(output) => {
                state.entries[entry].close(StepStatus::Done, Some(json_digest(&output)));
                for ev in &mut state.rollback_events[first_event..] {
                    ev.resolved = true;
                }
                return Ok(output);
            }
            Err(StepFailure::Backend(err)) => {
                state.entries[entry].close(StepStatus::Failed, None);
                state.quarantined_subjects.push(QuarantinedSubject {
                    step_id: step_id.to_string(),
                    subject_id: subject_id.to_string(),
                    reason: err.to_string(),
                });
                return Err(RollbackError::Backend(err));
            }
            Err(failure) => {
                last_reason = failure.reason();
                let digest = match &failure {
                    StepFailure::Invalid { partial, .. } => Some(json_digest(partial)),
                    _ => None,
                };
                state.entries[entry].close(StepStatus::Failed, digest);
                log::info!("rollback {step_id}/{subject_id} attempt {attempt}: {last_reason}");
                state.rollback_events.push(RollbackEvent {
                    step_id: step_id.to_string(),
                    subject_id: subject_id.to_string(),
                    attempt,
                    reason: last_reason.clone(),
                    resolved: false,
                });
                if let StepFailure::Invalid { partial, .. } = failure {
                    last_partial = Some(partial);
                }
            }
        }
    }
    state.quarantined_subjects.push(QuarantinedSubject {
        step_id: step_id.to_string(),
        subject_id: subject_id.to_string(),
        reason: last_reason.clone(),
    });
    Err(RollbackError::QuarantinedSubject { attempts: max_attempts, reason: last_reason, last_partial })
}
