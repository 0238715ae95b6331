//! Metadata-only client for a scholarly repository search endpoint.
//!
//! Request: `GET {endpoint}?query=<space-joined keywords>&limit=<n>` with the
//! API key (env `COMPASS_REPO_KEY`) in the `x-api-key` header. Response body:
//! `{"data": [{"paperId", "title", "abstract", "externalIds": {"DOI"}}]}`.

use std::sync::atomic::{AtomicU32, Ordering};

use serde::Deserialize;
use thiserror::Error;

use super::ParsedPaper;
use crate::gateway::RetryPolicy;

pub const REPO_KEY_ENV: &str = "COMPASS_REPO_KEY";

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("limit must be at least 1")]
    InvalidLimit,
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("repository quota exceeded")]
    QuotaExceeded,
    #[error("malformed repository response: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Deserialize)]
struct SearchResponse {
    data: Vec<SearchHit>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SearchHit {
    paper_id: String,
    title: String,
    #[serde(rename = "abstract", default)]
    abstract_text: Option<String>,
    #[serde(default)]
    external_ids: Option<ExternalIds>,
    #[serde(default)]
    url: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ExternalIds {
    #[serde(rename = "DOI")]
    doi: Option<String>,
}

enum Attempt {
    Retry(RemoteError),
    Stop(RemoteError),
}

pub struct RepositoryClient {
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    http: reqwest::blocking::Client,
    retries: AtomicU32,
}

impl RepositoryClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, retry: RetryPolicy) -> Self {
        RepositoryClient {
            endpoint: endpoint.into(),
            api_key,
            retry,
            http: reqwest::blocking::Client::new(),
            retries: AtomicU32::new(0),
        }
    }

    /// Reads the API key from `COMPASS_REPO_KEY`.
    pub fn from_env(endpoint: impl Into<String>, retry: RetryPolicy) -> Self {
        Self::new(endpoint, std::env::var(REPO_KEY_ENV).ok(), retry)
    }

    /// Number of retries performed so far by this client.
    pub fn retries_logged(&self) -> u32 {
        self.retries.load(Ordering::Relaxed)
    }

    /// Fetches at most `limit` metadata stubs (no tables) for `query`.
    pub fn fetch_remote(&self, query: &[String], limit: usize) -> Result<Vec<ParsedPaper>, RemoteError> {
        if limit == 0 {
            return Err(RemoteError::InvalidLimit);
        }
        let delays = self.retry.backoff_delays();
        let mut attempt = 0;
        loop {
            match self.attempt(query, limit) {
                Ok(stubs) => return Ok(stubs),
                Err(Attempt::Stop(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    if attempt + 1 >= self.retry.max_attempts as usize {
                        return Err(e);
                    }
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    log::warn!("repository request failed ({e}); retry {} of {}", attempt + 1, self.retry.max_attempts - 1);
                    std::thread::sleep(delays[attempt]);
                    attempt += 1;
                }
            }
        }
    }

    fn attempt(&self, query: &[String], limit: usize) -> Result<Vec<ParsedPaper>, Attempt> {
        let mut req = self
            .http
            .get(&self.endpoint)
            .query(&[("query", query.join(" ")), ("limit", limit.to_string())]);
        if let Some(key) = &self.api_key {
            req = req.header("x-api-key", key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(RemoteError::NetworkError(e.to_string())))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(Attempt::Retry(RemoteError::QuotaExceeded));
        }
        if status.is_server_error() {
            return Err(Attempt::Retry(RemoteError::NetworkError(format!("HTTP {status}"))));
        }
        if !status.is_success() {
            return Err(Attempt::Stop(RemoteError::NetworkError(format!("HTTP {status}"))));
        }
        let body = resp.text().map_err(|e| Attempt::Retry(RemoteError::NetworkError(e.to_string())))?;
        let parsed: SearchResponse =
            serde_json::from_str(&body).map_err(|e| Attempt::Stop(RemoteError::MalformedResponse(e.to_string())))?;
        Ok(parsed
            .data
            .into_iter()
            .take(limit)
            .map(|hit| ParsedPaper {
                paper_id: hit.paper_id.clone(),
                doi: hit.external_ids.and_then(|e| e.doi),
                title: hit.title,
                abstract_text: hit.abstract_text.unwrap_or_default(),
                sections: vec![],
                tables: vec![],
                source_uri: hit.url.unwrap_or_else(|| format!("{}#{}", self.endpoint, hit.paper_id)),
            })
            .collect())
    }
}
