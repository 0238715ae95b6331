use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendError, CompletionRequest};

pub const LLM_KEY_ENV: &str = "COMPASS_LLM_KEY";

/// OpenAI-style chat-completions backend.
///
/// POSTs `{model, messages: [{role, content}], temperature, max_tokens}` and
/// reads `choices[0].message.content`.
pub struct HttpBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        HttpBackend { url: url.into(), model: model.into(), api_key, client: reqwest::blocking::Client::new() }
    }

    /// Takes the bearer token from `COMPASS_LLM_KEY`.
    pub fn from_env(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self::new(url, model, std::env::var(LLM_KEY_ENV).ok())
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.bundle.system_text},
                {"role": "user", "content": request.bundle.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}")));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| BackendError::Fatal(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Fatal("response without choices".into()))
    }
}
