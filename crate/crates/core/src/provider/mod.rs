//! Model and search backends.
//!
//! Backends are trait objects shared across worker threads. The HTTP
//! backends retry transient failures and share a sliding-window rate
//! limiter; the mock backends serve fixtures; the record/replay wrappers
//! make any of them reproducible offline.

mod clock;
mod http;
mod limiter;
mod mock;
mod replay;
mod retry;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clock::{Clock, SystemClock, VirtualClock};
pub use http::{HttpModel, HttpSearch};
pub use limiter::RateLimiter;
pub use mock::{FixtureKind, Fixtures, MockAnswer, MockModel, MockSearch, SearchFixture};
pub use replay::{cache_key, search_cache_key, CacheMode, RecordReplayModel, RecordReplaySearch, ResponseCache};
pub use retry::{redact, send_with_retry, AttemptError, RetryPolicy};

pub const DEFAULT_SEARCH_RESULTS: usize = 5;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const MODEL_KEY_ENV: &str = "VERITY_MODEL_KEY";
pub const MODEL_ENDPOINT_ENV: &str = "VERITY_MODEL_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ModelRequest {
    /// A single-turn request at temperature 0.
    pub fn single(model_id: impl Into<String>, prompt: impl Into<String>) -> Self {
        ModelRequest {
            model_id: model_id.into(),
            messages: vec![Message::user(prompt)],
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("request has no messages".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Content of the last user message.
    pub fn last_user_content(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("gave up after {attempts} attempt(s): {last}")]
    TransientExhausted { attempts: u32, last: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request rejected (HTTP {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no recorded response for request {key}")]
    ReplayMiss { key: String },
    #[error("no fixture answer for {0:?}")]
    FixtureMiss(String),
    #[error("response cache error: {0}")]
    Cache(String),
}

impl ProviderError {
    pub fn is_transient(&self) -> bool {
        matches!(self, ProviderError::TransientExhausted { .. })
    }
}

pub trait ModelBackend: Send + Sync {
    fn complete(&self, request: &ModelRequest) -> Result<String, ProviderError>;
}

pub trait SearchBackend: Send + Sync {
    /// At most `k` results for `query`.
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, ProviderError>;
}

impl<T: ModelBackend + ?Sized> ModelBackend for std::sync::Arc<T> {
    fn complete(&self, request: &ModelRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

impl<T: SearchBackend + ?Sized> SearchBackend for std::sync::Arc<T> {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, ProviderError> {
        (**self).search(query, k)
    }
}

pub(crate) fn check_query(query: &str) -> Result<(), ProviderError> {
    if query.trim().is_empty() {
        Err(ProviderError::InvalidRequest("search query is empty".into()))
    } else {
        Ok(())
    }
}

fn default_auth_env() -> String {
    MODEL_KEY_ENV.to_owned()
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_rate_limit() -> u32 {
    60
}

fn default_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

/// Connection settings for an HTTP backend. Secrets are never stored here;
/// only the name of the environment variable that holds them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint: String,
    #[serde(default = "default_auth_env")]
    pub auth_env_var: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Requests per minute; 0 disables limiting.
    #[serde(default = "default_rate_limit")]
    pub rate_limit_per_minute: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl ProviderConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ProviderConfig {
            endpoint: endpoint.into(),
            auth_env_var: default_auth_env(),
            timeout_ms: default_timeout_ms(),
            retry: RetryPolicy::default(),
            rate_limit_per_minute: default_rate_limit(),
            max_in_flight: default_in_flight(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.retry.max_attempts < 1 {
            return Err("retry.max_attempts must be at least 1".into());
        }
        if self.max_in_flight < 1 {
            return Err("max_in_flight must be at least 1".into());
        }
        url::Url::parse(&self.endpoint).map_err(|e| format!("invalid endpoint {:?}: {e}", self.endpoint))?;
        Ok(())
    }
}
