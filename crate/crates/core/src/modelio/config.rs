use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const ENV_BASE_URL: &str = "SSRA_BASE_URL";
pub const ENV_API_KEY: &str = "SSRA_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles for each later attempt.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn no_backoff(max_attempts: u32) -> Self {
        RetryPolicy { max_attempts, backoff_ms: 0 }
    }

    fn delay_before(&self, attempt: u32) -> Duration {
        let factor = 1u64 << (attempt.saturating_sub(2)).min(20);
        Duration::from_millis(self.backoff_ms.saturating_mul(factor))
    }

    /// Runs `op` until it succeeds, fails with a non-retryable error, or the
    /// attempt budget is spent. The last error is returned.
    pub fn run<T>(&self, mut op: impl FnMut(u32) -> Result<T, ModelError>) -> Result<T, ModelError> {
        let attempts = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match op(attempt) {
                Ok(value) => return Ok(value),
                Err(e) if e.is_retryable() && attempt < attempts => {
                    attempt += 1;
                    let delay = self.delay_before(attempt);
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// The model role an endpoint serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    Score,
    Query,
    Judge,
    Rewrite,
    Reasoning,
}

impl ModelRole {
    /// Decision tasks decode greedily; generation samples.
    pub fn default_temperature(self) -> f64 {
        match self {
            ModelRole::Query | ModelRole::Rewrite => 0.7,
            ModelRole::Score | ModelRole::Judge | ModelRole::Reasoning => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    /// Bearer token; normally supplied through the environment.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
}

fn default_concurrency() -> usize {
    8
}

fn default_timeout() -> u64 {
    60_000
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>, role: ModelRole) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: role.default_temperature(),
            max_concurrency: default_concurrency(),
            retry: RetryPolicy::default(),
            timeout_ms: default_timeout(),
            api_key: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ModelError::Config(format!("base_url {:?} is not an http(s) URL", self.base_url)));
        }
        if self.model_name.is_empty() {
            return Err(ModelError::Config("model_name is empty".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ModelError::Config(format!("temperature {} < 0", self.temperature)));
        }
        if self.max_concurrency == 0 {
            return Err(ModelError::Config("max_concurrency must be >= 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(ModelError::Config("retry.max_attempts must be >= 1".into()));
        }
        Ok(())
    }

    /// Applies `SSRA_BASE_URL` / `SSRA_API_KEY` through the given lookup.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(url) = lookup(ENV_BASE_URL).filter(|s| !s.is_empty()) {
            self.base_url = url;
        }
        if let Some(key) = lookup(ENV_API_KEY).filter(|s| !s.is_empty()) {
            self.api_key = Some(key);
        }
    }

    pub fn apply_process_env(&mut self) {
        self.apply_env(|k| std::env::var(k).ok());
    }
}
