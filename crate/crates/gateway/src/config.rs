use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{GatewayError, Result};

/// Which model an endpoint serves; decides the default decoding parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Nonthinking,
    Thinking,
    Embedding,
}

/// One OpenAI-compatible endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub min_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    /// Sent as `chat_template_kwargs.enable_thinking` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enable_thinking: Option<bool>,
    pub request_timeout_secs: f64,
    pub max_parallel: usize,
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_cap_ms: u64,
}

impl EndpointConfig {
    pub fn for_role(role: Role, base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        let (temperature, top_p) = match role {
            Role::Nonthinking => (0.7, 0.8),
            Role::Thinking => (0.6, 0.95),
            Role::Embedding => (0.0, 1.0),
        };
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: None,
            temperature,
            top_p,
            top_k: 20,
            min_p: 0.0,
            max_tokens: None,
            enable_thinking: match role {
                Role::Nonthinking => Some(false),
                Role::Thinking => Some(true),
                Role::Embedding => None,
            },
            request_timeout_secs: 600.0,
            max_parallel: 8,
            max_retries: 5,
            backoff_initial_ms: 500,
            backoff_cap_ms: 30_000,
        }
    }

    pub fn nonthinking(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self::for_role(Role::Nonthinking, base_url, model_name)
    }

    pub fn thinking(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self::for_role(Role::Thinking, base_url, model_name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GatewayError::Config(format!("{}: {msg}", self.model_name)));
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad(format!("base_url {:?} must be an http(s) URL", self.base_url));
        }
        if self.model_name.is_empty() {
            return bad("model_name is empty".into());
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!("temperature {} must be >= 0", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p {} outside (0, 1]", self.top_p));
        }
        if !(0.0..=1.0).contains(&self.min_p) {
            return bad(format!("min_p {} outside [0, 1]", self.min_p));
        }
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            return bad("request_timeout_secs must be positive".into());
        }
        if self.max_parallel == 0 {
            return bad("max_parallel must be positive".into());
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs)
    }

    /// Reads the API key from the configured environment variable.
    pub fn api_key(&self) -> Result<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| GatewayError::Config(format!("environment variable {var} is not set"))),
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.min(32)).unwrap_or(u64::MAX);
        Duration::from_millis(self.backoff_initial_ms.saturating_mul(factor).min(self.backoff_cap_ms))
    }
}

/// An endpoint section as written in the config file; omitted decoding
/// parameters fall back to the role defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndpointSection {
    base_url: String,
    model_name: String,
    api_key_env: Option<String>,
    temperature: Option<f64>,
    top_p: Option<f64>,
    top_k: Option<u32>,
    min_p: Option<f64>,
    max_tokens: Option<u32>,
    enable_thinking: Option<bool>,
    request_timeout_secs: Option<f64>,
    max_parallel: Option<usize>,
    max_retries: Option<u32>,
    backoff_initial_ms: Option<u64>,
    backoff_cap_ms: Option<u64>,
}

impl EndpointSection {
    fn resolve(self, role: Role) -> EndpointConfig {
        let d = EndpointConfig::for_role(role, self.base_url, self.model_name);
        EndpointConfig {
            api_key_env: self.api_key_env,
            temperature: self.temperature.unwrap_or(d.temperature),
            top_p: self.top_p.unwrap_or(d.top_p),
            top_k: self.top_k.unwrap_or(d.top_k),
            min_p: self.min_p.unwrap_or(d.min_p),
            max_tokens: self.max_tokens.or(d.max_tokens),
            enable_thinking: self.enable_thinking.or(d.enable_thinking),
            request_timeout_secs: self.request_timeout_secs.unwrap_or(d.request_timeout_secs),
            max_parallel: self.max_parallel.unwrap_or(d.max_parallel),
            max_retries: self.max_retries.unwrap_or(d.max_retries),
            backoff_initial_ms: self.backoff_initial_ms.unwrap_or(d.backoff_initial_ms),
            backoff_cap_ms: self.backoff_cap_ms.unwrap_or(d.backoff_cap_ms),
            ..d
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    cache_dir: Option<PathBuf>,
    nonthinking: EndpointSection,
    thinking: EndpointSection,
    embedding: Option<EndpointSection>,
}

/// The endpoints a pipeline run talks to.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub nonthinking: EndpointConfig,
    pub thinking: EndpointConfig,
    pub embedding: Option<EndpointConfig>,
    pub cache_dir: PathBuf,
}

impl GatewayConfig {
    /// Parses a TOML config. A relative `cache_dir` is resolved against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        let cache_dir = file.cache_dir.unwrap_or_else(|| PathBuf::from(".pacroute-cache"));
        let cfg = Self {
            nonthinking: file.nonthinking.resolve(Role::Nonthinking),
            thinking: file.thinking.resolve(Role::Thinking),
            embedding: file.embedding.map(|e| e.resolve(Role::Embedding)),
            cache_dir: if cache_dir.is_absolute() { cache_dir } else { base.join(cache_dir) },
        };
        cfg.nonthinking.validate()?;
        cfg.thinking.validate()?;
        if let Some(e) = &cfg.embedding {
            e.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::io(path, e))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }
}
