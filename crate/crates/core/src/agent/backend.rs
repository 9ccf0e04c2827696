use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tracing::{debug, warn};

use super::mock::{PostFeatures, SessionFeatures};
use crate::population::{BootstrapRequest, CensusProfile, ModelTier, UserId};

/// Environment variable holding the HTTP backend credential.
pub const API_KEY_ENV: &str = "SOCIOPOL_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend misconfigured: {0}")]
    Config(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed completion payload: {0}")]
    Payload(String),
}

/// What a request is for. The HTTP backend only sends the prompt text; the
/// mock backend reads the structured features instead.
pub enum Task<'a> {
    Session(&'a SessionFeatures),
    Bootstrap(&'a BootstrapRequest<'a>),
    Vote { user_id: UserId, likelihood: u8 },
    Post(&'a PostFeatures),
    Stance { profile: &'a CensusProfile, seed: u64 },
}

pub struct BackendRequest<'a> {
    pub tier: ModelTier,
    pub prompt: &'a str,
    pub task: Task<'a>,
}

/// A completion source. Implementations must be stateless per call so the
/// engine can issue requests for different agents concurrently.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: Option<String>,
    pub model_by_tier: BTreeMap<ModelTier, String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub temperature: f64,
    /// Upper bound on concurrent requests within one round.
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            base_url: None,
            model_by_tier: ModelTier::ALL.iter().map(|t| (*t, t.default_model_name().to_string())).collect(),
            timeout_secs: 60.0,
            max_retries: 3,
            initial_backoff_ms: 500,
            temperature: 0.7,
            max_in_flight: 8,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_in_flight == 0 {
            return Err("backend.max_in_flight must be positive".into());
        }
        if !(self.timeout_secs > 0.0) {
            return Err("backend.timeout_secs must be positive".into());
        }
        if self.kind == BackendKind::Http {
            if self.base_url.as_deref().is_none_or(str::is_empty) {
                return Err("http backend requires base_url".into());
            }
            for tier in ModelTier::ALL {
                if !self.model_by_tier.contains_key(&tier) {
                    return Err(format!("http backend has no model for tier {}", tier.as_str()));
                }
            }
        }
        Ok(())
    }
}

/// Chat-completions client with exponential backoff.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    config: BackendConfig,
}

impl HttpBackend {
    /// Reads the credential from `SOCIOPOL_API_KEY`.
    pub fn from_env(config: &BackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| BackendError::Config(format!("environment variable {API_KEY_ENV} is not set")))?;
        Self::new(config, key)
    }

    pub fn new(config: &BackendConfig, api_key: String) -> Result<Self, BackendError> {
        config.validate().map_err(BackendError::Config)?;
        let base = config.base_url.clone().unwrap_or_default();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend {
            client,
            endpoint: format!("{}/chat/completions", base.trim_end_matches('/')),
            api_key,
            config: config.clone(),
        })
    }

    pub fn request_body(&self, request: &BackendRequest<'_>) -> serde_json::Value {
        json!({
            "model": self.config.model_by_tier[&request.tier],
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.config.temperature,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, String)> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| (true, e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| (true, e.to_string()))?;
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            return Err((retryable, format!("status {}: {text}", status.as_u16())));
        }
        let payload: serde_json::Value = serde_json::from_str(&text).map_err(|e| (false, e.to_string()))?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, "response has no choices[0].message.content".to_string()))
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError> {
        let body = self.request_body(request);
        let attempts = self.config.max_retries + 1;
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retryable, msg)) => {
                    warn!(attempt, "completion request failed: {msg}");
                    last = msg;
                    if !retryable {
                        return Err(BackendError::Payload(last));
                    }
                }
            }
            if attempt < attempts {
                debug!(?backoff, "backing off");
                std::thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(BackendError::Exhausted { attempts, last })
    }
}
