use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use super::{Backend, BackendError, CompletionRequest, MockFixtureTable};

/// Answers by request tag (`step|subject`), ignoring prompt content. Used to
/// author mock fixtures from a hand-written answer key.
pub struct AnswerKeyBackend {
    answers: HashMap<String, String>,
}

impl AnswerKeyBackend {
    pub fn new(answers: HashMap<String, String>) -> Self {
        AnswerKeyBackend { answers }
    }
}

impl Backend for AnswerKeyBackend {
    fn id(&self) -> String {
        "answer-key".into()
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.answers
            .get(request.base_tag())
            .cloned()
            .ok_or_else(|| BackendError::Fatal(format!("no answer for `{}`", request.base_tag())))
    }
}

/// Records every successful reply under its prompt digest.
pub struct RecordingBackend {
    inner: Arc<dyn Backend>,
    recorded: Mutex<BTreeMap<String, String>>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn Backend>) -> Self {
        RecordingBackend { inner, recorded: Mutex::new(BTreeMap::new()) }
    }

    pub fn fixture_table(&self) -> MockFixtureTable {
        MockFixtureTable { entries: self.recorded.lock().expect("recorder lock").clone(), ..Default::default() }
    }
}

impl Backend for RecordingBackend {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let text = self.inner.send(request)?;
        self.recorded.lock().expect("recorder lock").insert(request.digest(), text.clone());
        Ok(text)
    }
}
