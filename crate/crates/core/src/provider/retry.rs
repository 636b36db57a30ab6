use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Clock, ProviderError, RateLimiter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            base_backoff_ms: 500,
            max_backoff_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): `base * 2^(retry-1)`, capped.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64 << (retry.saturating_sub(1)).min(20);
        Duration::from_millis(self.base_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// Outcome of one failed attempt.
#[derive(Debug)]
pub enum AttemptError {
    /// Worth retrying; `retry_after` is the server's hint, if any.
    Transient {
        message: String,
        retry_after: Option<Duration>,
    },
    Fatal(ProviderError),
}

impl AttemptError {
    /// Classifies a `ureq` failure. 401/403 are fatal auth errors; 408, 429
    /// and 5xx, plus transport failures, are transient.
    pub fn from_ureq(err: ureq::Error, secrets: &[&str]) -> AttemptError {
        match err {
            ureq::Error::Status(status, response) => {
                let retry_after = response
                    .header("retry-after")
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(Duration::from_secs);
                match status {
                    401 | 403 => AttemptError::Fatal(ProviderError::Auth { status }),
                    408 | 429 | 500..=599 => AttemptError::Transient {
                        message: format!("HTTP {status}"),
                        retry_after,
                    },
                    _ => {
                        let body = response.into_string().unwrap_or_default();
                        let excerpt: String = body.chars().take(200).collect();
                        AttemptError::Fatal(ProviderError::Rejected {
                            status,
                            message: redact(&excerpt, secrets),
                        })
                    }
                }
            }
            ureq::Error::Transport(transport) => AttemptError::Transient {
                message: redact(&transport.to_string(), secrets),
                retry_after: None,
            },
        }
    }
}

/// Replaces every occurrence of each non-empty secret with `<redacted>`.
pub fn redact(text: &str, secrets: &[&str]) -> String {
    secrets
        .iter()
        .filter(|s| !s.is_empty())
        .fold(text.to_owned(), |acc, secret| acc.replace(secret, "<redacted>"))
}

/// Runs `attempt` until it succeeds, fails fatally, or the policy's attempts
/// are spent. Each attempt first takes a permit from `limiter`.
pub fn send_with_retry<T>(
    policy: &RetryPolicy,
    clock: &dyn Clock,
    limiter: Option<&RateLimiter>,
    mut attempt: impl FnMut() -> Result<T, AttemptError>,
) -> Result<T, ProviderError> {
    let max_attempts = policy.max_attempts.max(1);
    let mut tried = 0;
    loop {
        if let Some(limiter) = limiter {
            limiter.acquire();
        }
        tried += 1;
        match attempt() {
            Ok(value) => return Ok(value),
            Err(AttemptError::Fatal(err)) => return Err(err),
            Err(AttemptError::Transient { message, retry_after }) => {
                if tried >= max_attempts {
                    return Err(ProviderError::TransientExhausted {
                        attempts: tried,
                        last: message,
                    });
                }
                let wait = policy.backoff(tried).max(retry_after.unwrap_or_default());
                log::debug!("transient failure ({message}); retrying in {wait:?}");
                clock.sleep(wait);
            }
        }
    }
}
