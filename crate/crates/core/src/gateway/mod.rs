//! Completion gateway: one interface over the HTTP chat backend and the
//! digest-keyed mock, with retries, a shared in-flight cap and structured
//! output parsing.

mod answer_key;
mod fault;
mod http;
mod mock;
mod structured;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::prompt_digest;
use crate::knowledge_tree::{estimate_tokens, PromptBundle};

pub use answer_key::{AnswerKeyBackend, RecordingBackend};
pub use fault::{FaultInjector, FaultMode, INJECTED_GARBAGE};
pub use http::{HttpBackend, LLM_KEY_ENV};
pub use mock::{MissPolicy, MockBackend, MockFixtureTable};
pub use structured::{parse_structured, FieldKind, OutputShape, StructuredError};

/// Separates a request tag from its retry nonce.
pub const NONCE_SEPARATOR: &str = "@@";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub bundle: PromptBundle,
    pub max_output_tokens: usize,
    pub temperature: f64,
    pub request_tag: String,
}

impl CompletionRequest {
    pub fn new(bundle: PromptBundle, max_output_tokens: usize, request_tag: impl Into<String>) -> Self {
        CompletionRequest { bundle, max_output_tokens, temperature: 0.0, request_tag: request_tag.into() }
    }

    pub fn digest(&self) -> String {
        prompt_digest(&self.bundle.system_text, &self.bundle.user_text)
    }

    /// The tag without any retry nonce.
    pub fn base_tag(&self) -> &str {
        self.request_tag.split(NONCE_SEPARATOR).next().unwrap_or(&self.request_tag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
    #[error("no fixture for prompt digest {0}")]
    FixtureMiss(String),
}

pub trait Backend: Send + Sync {
    fn id(&self) -> String;
    fn send(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempts: {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("no fixture for prompt digest {0}")]
    FixtureMiss(String),
    #[error("request needs ~{tokens} tokens, budget is {budget}")]
    BudgetExceeded { tokens: usize, budget: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay_ms: 250, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy { max_attempts, base_delay_ms: 0, max_delay_ms: 0 }
    }

    /// Sleep before each retry: base·2^i capped at `max_delay_ms`. One entry
    /// per retry, so `max_attempts - 1` entries.
    pub fn backoff_delays(&self) -> Vec<Duration> {
        (0..self.max_attempts.saturating_sub(1))
            .map(|i| {
                let ms = self.base_delay_ms.saturating_mul(1u64 << i.min(32)).min(self.max_delay_ms.max(self.base_delay_ms));
                Duration::from_millis(ms)
            })
            .collect()
    }
}

/// Counting semaphore capping in-flight backend calls.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("limiter lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("limiter lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("limiter lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub retry: RetryPolicy,
    pub max_parallel: usize,
    pub token_budget: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig { retry: RetryPolicy::default(), max_parallel: 4, token_budget: 32_768 }
    }
}

pub struct Gateway {
    backend: Arc<dyn Backend>,
    config: GatewayConfig,
    limiter: Limiter,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, config: GatewayConfig) -> Self {
        Gateway { backend, limiter: Limiter::new(config.max_parallel), config }
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        let tokens = estimate_tokens(&request.bundle.system_text)
            + estimate_tokens(&request.bundle.user_text)
            + request.max_output_tokens;
        if tokens > self.config.token_budget {
            return Err(GatewayError::BudgetExceeded { tokens, budget: self.config.token_budget });
        }
        let delays = self.config.retry.backoff_delays();
        let max_attempts = self.config.retry.max_attempts.max(1);
        let started = Instant::now();
        let mut attempt = 1;
        loop {
            let result = {
                let _permit = self.limiter.acquire();
                self.backend.send(request)
            };
            match result {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        backend_id: self.backend.id(),
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt_count: attempt,
                    })
                }
                Err(BackendError::FixtureMiss(d)) => return Err(GatewayError::FixtureMiss(d)),
                Err(BackendError::Fatal(msg)) => {
                    return Err(GatewayError::BackendUnavailable { attempts: attempt, last: msg })
                }
                Err(BackendError::Transient(msg)) => {
                    if attempt >= max_attempts {
                        return Err(GatewayError::BackendUnavailable { attempts: attempt, last: msg });
                    }
                    log::debug!("{}: transient failure ({msg}), attempt {attempt}", request.request_tag);
                    std::thread::sleep(delays[(attempt - 1) as usize]);
                    attempt += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

    pub(crate) fn bundle(user: &str) -> PromptBundle {
        PromptBundle {
            system_text: "sys".into(),
            user_text: user.into(),
            output_schema_hint: "{\"label\": string}".into(),
            source_node_id: "n".into(),
            context_digest: "d".into(),
        }
    }

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
    }

    impl Backend for Flaky {
        fn id(&self) -> String {
            "flaky".into()
        }
        fn send(&self, _: &CompletionRequest) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(BackendError::Transient("503".into()))
            } else {
                Ok("ok".into())
            }
        }
    }

    fn gateway(backend: Arc<dyn Backend>, attempts: u32) -> Gateway {
        Gateway::new(backend, GatewayConfig { retry: RetryPolicy::immediate(attempts), ..Default::default() })
    }

    #[test]
    fn retries_then_succeeds() {
        let g = gateway(Arc::new(Flaky { failures: 2, calls: AtomicU32::new(0) }), 3);
        let c = g.complete(&CompletionRequest::new(bundle("x"), 16, "t")).unwrap();
        assert_eq!(c.attempt_count, 3);
        assert_eq!(c.text, "ok");
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let flaky = Arc::new(Flaky { failures: 10, calls: AtomicU32::new(0) });
        let g = gateway(flaky.clone(), 3);
        let err = g.complete(&CompletionRequest::new(bundle("x"), 16, "t")).unwrap_err();
        assert!(matches!(err, GatewayError::BackendUnavailable { attempts: 3, .. }));
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn budget_enforced() {
        let g = Gateway::new(
            Arc::new(Flaky { failures: 0, calls: AtomicU32::new(0) }),
            GatewayConfig { token_budget: 10, ..Default::default() },
        );
        let err = g.complete(&CompletionRequest::new(bundle(&"x".repeat(100)), 16, "t")).unwrap_err();
        assert!(matches!(err, GatewayError::BudgetExceeded { .. }));
    }

    #[test]
    fn backoff_is_monotone_and_capped() {
        let p = RetryPolicy { max_attempts: 8, base_delay_ms: 100, max_delay_ms: 1_000 };
        let d = p.backoff_delays();
        assert_eq!(d.len(), 7);
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*d.last().unwrap(), Duration::from_millis(1_000));
        assert_eq!(d[0], Duration::from_millis(100));
    }

    struct Counting {
        live: AtomicUsize,
        peak: AtomicUsize,
    }

    impl Backend for Counting {
        fn id(&self) -> String {
            "counting".into()
        }
        fn send(&self, _: &CompletionRequest) -> Result<String, BackendError> {
            let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.live.fetch_sub(1, Ordering::SeqCst);
            Ok("ok".into())
        }
    }

    #[test]
    fn in_flight_requests_are_capped() {
        let backend = Arc::new(Counting { live: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
        let g = Arc::new(Gateway::new(backend.clone(), GatewayConfig { max_parallel: 2, ..Default::default() }));
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let g = g.clone();
                std::thread::spawn(move || g.complete(&CompletionRequest::new(bundle(&i.to_string()), 4, "t")).unwrap())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(backend.peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn base_tag_strips_nonce() {
        let r = CompletionRequest::new(bundle("x"), 4, format!("classify_paper|p1{NONCE_SEPARATOR}2"));
        assert_eq!(r.base_tag(), "classify_paper|p1");
    }
}
