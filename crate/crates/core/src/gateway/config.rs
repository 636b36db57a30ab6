use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::Strategy;
use crate::provider::{ProviderConfig, RetryPolicy, DEFAULT_MAX_IN_FLIGHT, MODEL_ENDPOINT_ENV};

pub const BOT_TOKEN_ENV: &str = "VERITY_BOT_TOKEN";
pub const SEARCH_ENDPOINT_ENV: &str = "VERITY_SEARCH_ENDPOINT";
pub const BOT_API_BASE_ENV: &str = "VERITY_BOT_API_BASE";
pub const MODEL_ID_ENV: &str = "VERITY_MODEL_ID";
pub const SEARCH_KEY_ENV: &str = "VERITY_SEARCH_KEY";

const DEFAULT_MODEL_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
const DEFAULT_MODEL_ID: &str = "gpt-4";
const DEFAULT_BOT_API: &str = "https://api.telegram.org";

fn default_model_id() -> String {
    DEFAULT_MODEL_ID.to_owned()
}

fn default_provider() -> ProviderConfig {
    ProviderConfig::new(DEFAULT_MODEL_ENDPOINT)
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_concurrency() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BotConfig {
    /// Name of the environment variable holding the bot token.
    pub token_env_var: String,
    pub api_base: String,
    /// Long-poll timeout passed to `getUpdates`.
    pub poll_timeout_secs: u64,
    /// Pause after a failed poll.
    pub poll_interval_ms: u64,
    pub retry: RetryPolicy,
}

impl Default for BotConfig {
    fn default() -> Self {
        BotConfig {
            token_env_var: BOT_TOKEN_ENV.to_owned(),
            api_base: DEFAULT_BOT_API.to_owned(),
            poll_timeout_secs: 30,
            poll_interval_ms: 1000,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub model_id: String,
    pub strategy: Strategy,
    pub temperature: f64,
    pub max_steps: usize,
    pub concurrency: usize,
    pub output_dir: PathBuf,
    /// Extra abbreviation list, one token per line.
    pub abbreviations: Option<PathBuf>,
    /// Replacement few-shot template file.
    pub template: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub search: Option<ProviderConfig>,
    pub bot: BotConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            model_id: default_model_id(),
            strategy: Strategy::FewShot,
            temperature: 0.0,
            max_steps: crate::agent::DEFAULT_MAX_STEPS,
            concurrency: default_concurrency(),
            output_dir: default_output_dir(),
            abbreviations: None,
            template: None,
            provider: default_provider(),
            search: None,
            bot: BotConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl AppConfig {
    pub fn from_toml(source: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(source)
    }

    /// Reads `path` (defaults when `None`), then applies environment
    /// overrides, then validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => {
                let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                Self::from_toml(&source).map_err(|source| ConfigError::Parse {
                    path: path.display().to_string(),
                    source,
                })?
            }
            None => AppConfig::default(),
        };
        config.apply_env(|name| std::env::var(name).ok().filter(|v| !v.is_empty()));
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(endpoint) = get(MODEL_ENDPOINT_ENV) {
            self.provider.endpoint = endpoint;
        }
        if let Some(model_id) = get(MODEL_ID_ENV) {
            self.model_id = model_id;
        }
        if let Some(endpoint) = get(SEARCH_ENDPOINT_ENV) {
            match &mut self.search {
                Some(search) => search.endpoint = endpoint,
                None => {
                    self.search = Some(ProviderConfig {
                        auth_env_var: SEARCH_KEY_ENV.to_owned(),
                        ..ProviderConfig::new(endpoint)
                    })
                }
            }
        }
        if let Some(base) = get(BOT_API_BASE_ENV) {
            self.bot.api_base = base;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        self.provider.validate().map_err(|e| invalid(format!("provider: {e}")))?;
        if let Some(search) = &self.search {
            search.validate().map_err(|e| invalid(format!("search: {e}")))?;
        }
        if self.model_id.trim().is_empty() {
            return Err(invalid("model_id is empty".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(invalid(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.max_steps < 1 {
            return Err(invalid("max_steps must be at least 1".into()));
        }
        if self.concurrency < 1 {
            return Err(invalid("concurrency must be at least 1".into()));
        }
        url::Url::parse(&self.bot.api_base).map_err(|e| invalid(format!("bot.api_base: {e}")))?;
        Ok(())
    }
}
