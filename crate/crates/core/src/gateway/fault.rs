use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use super::{Backend, BackendError, CompletionRequest};

pub const INJECTED_GARBAGE: &str = "<<injected fault: truncated output>>";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultMode {
    /// First reply per prompt is malformed text.
    Garbage,
    /// First call per prompt fails as a transient backend error.
    Transient,
}

/// Wraps a backend so that the first request for every distinct prompt fails.
pub struct FaultInjector {
    inner: Arc<dyn Backend>,
    mode: FaultMode,
    seen: Mutex<HashSet<String>>,
}

impl FaultInjector {
    pub fn new(inner: Arc<dyn Backend>, mode: FaultMode) -> Self {
        FaultInjector { inner, mode, seen: Mutex::new(HashSet::new()) }
    }

    pub fn faults_injected(&self) -> usize {
        self.seen.lock().expect("fault set lock").len()
    }
}

impl Backend for FaultInjector {
    fn id(&self) -> String {
        format!("{}+faults", self.inner.id())
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let first = self.seen.lock().expect("fault set lock").insert(request.digest());
        if first {
            return match self.mode {
                FaultMode::Garbage => Ok(INJECTED_GARBAGE.to_string()),
                FaultMode::Transient => Err(BackendError::Transient("injected fault".into())),
            };
        }
        self.inner.send(request)
    }
}
