use std::io::Read;
use std::time::Duration;

use thiserror::Error;

pub const FETCH_TIMEOUT: Duration = Duration::from_secs(10);
pub const MAX_REDIRECTS: u32 = 5;
pub const MAX_BODY_BYTES: u64 = 5 * 1024 * 1024;

#[derive(Debug, Clone, Copy)]
pub struct FetchLimits {
    pub timeout: Duration,
    pub max_redirects: u32,
    pub max_body_bytes: u64,
}

impl Default for FetchLimits {
    fn default() -> Self {
        FetchLimits {
            timeout: FETCH_TIMEOUT,
            max_redirects: MAX_REDIRECTS,
            max_body_bytes: MAX_BODY_BYTES,
        }
    }
}

#[derive(Debug)]
pub struct Fetched {
    pub final_url: String,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("unsupported URL {0:?} (only http and https are fetched)")]
    Scheme(String),
    #[error("GET {url} returned HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("GET {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("GET {url}: body exceeds {limit} bytes")]
    TooLarge { url: String, limit: u64 },
}

pub fn is_url(input: &str) -> bool {
    let lower = input.trim_start().to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://")
}

/// One GET with bounded time, redirects and body size.
pub fn fetch_url(url: &str, limits: &FetchLimits) -> Result<Fetched, FetchError> {
    let parsed = url::Url::parse(url).map_err(|_| FetchError::Scheme(url.to_owned()))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(FetchError::Scheme(url.to_owned()));
    }
    let agent = ureq::AgentBuilder::new()
        .timeout(limits.timeout)
        .redirects(limits.max_redirects)
        .build();
    let response = agent.get(url).call().map_err(|e| match e {
        ureq::Error::Status(status, _) => FetchError::Status {
            url: url.to_owned(),
            status,
        },
        ureq::Error::Transport(t) => FetchError::Transport {
            url: url.to_owned(),
            message: t.to_string(),
        },
    })?;
    let final_url = response.get_url().to_owned();
    let content_type = response.header("content-type").map(str::to_owned);
    let mut body = Vec::new();
    response
        .into_reader()
        .take(limits.max_body_bytes + 1)
        .read_to_end(&mut body)
        .map_err(|e| FetchError::Transport {
            url: url.to_owned(),
            message: e.to_string(),
        })?;
    if body.len() as u64 > limits.max_body_bytes {
        return Err(FetchError::TooLarge {
            url: url.to_owned(),
            limit: limits.max_body_bytes,
        });
    }
    Ok(Fetched {
        final_url,
        content_type,
        body,
    })
}
