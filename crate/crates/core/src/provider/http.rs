use std::sync::Arc;

use serde_json::{json, Value};

use super::retry::{send_with_retry, AttemptError};
use super::{
    check_query, Clock, ModelBackend, ModelRequest, ProviderConfig, ProviderError, RateLimiter,
    SearchBackend, SearchResult, SystemClock,
};

struct Transport {
    config: ProviderConfig,
    agent: ureq::Agent,
    clock: Arc<dyn Clock>,
    limiter: Option<RateLimiter>,
}

impl Transport {
    fn new(config: ProviderConfig, clock: Arc<dyn Clock>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout()).build();
        let limiter = (config.rate_limit_per_minute > 0)
            .then(|| RateLimiter::per_minute(config.rate_limit_per_minute, clock.clone()));
        Transport {
            config,
            agent,
            clock,
            limiter,
        }
    }

    /// Secret read at call time from the configured environment variable.
    fn secret(&self) -> Option<String> {
        std::env::var(&self.config.auth_env_var)
            .ok()
            .filter(|s| !s.is_empty())
    }

    fn call(&self, build: impl Fn(&ureq::Agent) -> Result<ureq::Response, ureq::Error>) -> Result<Value, ProviderError> {
        let secret = self.secret();
        let secrets: Vec<&str> = secret.as_deref().into_iter().collect();
        send_with_retry(&self.config.retry, self.clock.as_ref(), self.limiter.as_ref(), || {
            let response = build(&self.agent).map_err(|e| AttemptError::from_ureq(e, &secrets))?;
            response.into_json::<Value>().map_err(|e| {
                AttemptError::Fatal(ProviderError::MalformedResponse(format!("body is not JSON: {e}")))
            })
        })
    }

    fn authorize(&self, request: ureq::Request) -> ureq::Request {
        match self.secret() {
            Some(secret) => request.set("Authorization", &format!("Bearer {secret}")),
            None => request,
        }
    }
}

/// Chat-completion client: `messages` in, `choices[0].message.content` out.
pub struct HttpModel {
    transport: Transport,
}

impl HttpModel {
    pub fn new(config: ProviderConfig) -> Self {
        Self::with_clock(config, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(config: ProviderConfig, clock: Arc<dyn Clock>) -> Self {
        HttpModel {
            transport: Transport::new(config, clock),
        }
    }
}

impl ModelBackend for HttpModel {
    fn complete(&self, request: &ModelRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let body = json!({
            "model": request.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let value = self.transport.call(|agent| {
            self.transport
                .authorize(agent.post(&self.transport.config.endpoint))
                .send_json(body.clone())
        })?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| ProviderError::MalformedResponse("missing choices[0].message.content".into()))
    }
}

/// Web search over HTTP: `GET endpoint?q=..&count=k`.
///
/// Accepts either `{"results": [{title, url, snippet}]}` or the Bing shape
/// `{"webPages": {"value": [{name, url, snippet}]}}`.
pub struct HttpSearch {
    transport: Transport,
}

impl HttpSearch {
    pub fn new(config: ProviderConfig) -> Self {
        Self::with_clock(config, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(config: ProviderConfig, clock: Arc<dyn Clock>) -> Self {
        HttpSearch {
            transport: Transport::new(config, clock),
        }
    }
}

fn parse_search_results(value: &Value) -> Result<Vec<SearchResult>, ProviderError> {
    let (items, title_key) = if let Some(items) = value.get("results").and_then(Value::as_array) {
        (items, "title")
    } else if let Some(items) = value.pointer("/webPages/value").and_then(Value::as_array) {
        (items, "name")
    } else if value.get("webPages").is_none() && value.get("_type").is_some() {
        return Ok(Vec::new());
    } else {
        return Err(ProviderError::MalformedResponse("no result list in search response".into()));
    };
    let field = |item: &Value, key: &str| item.get(key).and_then(Value::as_str).unwrap_or("").to_owned();
    Ok(items
        .iter()
        .map(|item| SearchResult {
            title: field(item, title_key),
            url: field(item, "url"),
            snippet: field(item, "snippet"),
        })
        .filter(|r| !r.url.is_empty())
        .collect())
}

impl SearchBackend for HttpSearch {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, ProviderError> {
        check_query(query)?;
        let value = self.transport.call(|agent| {
            self.transport
                .authorize(agent.get(&self.transport.config.endpoint))
                .query("q", query)
                .query("count", &k.to_string())
                .call()
        })?;
        let mut results = parse_search_results(&value)?;
        results.truncate(k);
        Ok(results)
    }
}
