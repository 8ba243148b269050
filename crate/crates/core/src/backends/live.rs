//! Chat-completion client over HTTP.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use crate::extract::{BackendError, BackendIdentity, CompletionBackend, CompletionRequest};

pub const LLM_KEY_ENV: &str = "REPO2LABEL_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub base_url: String,
    pub model: String,
    /// Request budget; `None` disables client-side limiting.
    pub requests_per_minute: Option<u32>,
    pub timeout_secs: u64,
}

impl LiveConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        LiveConfig {
            base_url: base_url.into(),
            model: model.into(),
            requests_per_minute: Some(60),
            timeout_secs: 120,
        }
    }
}

/// Token bucket holding at most `capacity` tokens, refilled continuously.
pub struct TokenBucket {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(n: u32) -> Self {
        let capacity = f64::from(n.max(1));
        TokenBucket {
            capacity,
            per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Takes one token, returning how long the caller must wait first.
    fn reserve(&self) -> Duration {
        let mut state = self.state.lock().unwrap();
        let now = Instant::now();
        let (tokens, last) = *state;
        let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.per_sec).min(self.capacity) - 1.0;
        *state = (tokens, now);
        if tokens >= 0.0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(-tokens / self.per_sec)
        }
    }

    pub fn acquire(&self) {
        let wait = self.reserve();
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

pub struct LiveBackend {
    client: Client,
    config: LiveConfig,
    key: String,
    limiter: Option<TokenBucket>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

impl LiveBackend {
    /// Reads the API key from `REPO2LABEL_LLM_KEY`.
    pub fn from_env(config: LiveConfig) -> Result<Self, BackendError> {
        match std::env::var(LLM_KEY_ENV) {
            Ok(key) if !key.trim().is_empty() => Self::with_key(config, key),
            _ => Err(BackendError::Fatal(format!(
                "the live backend needs an API key in the {LLM_KEY_ENV} environment variable"
            ))),
        }
    }

    pub fn with_key(config: LiveConfig, key: String) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Fatal(e.to_string()))?;
        Ok(LiveBackend {
            client,
            limiter: config.requests_per_minute.map(TokenBucket::per_minute),
            config,
            key,
        })
    }
}

impl CompletionBackend for LiveBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut body = serde_json::json!({
            "model": self.config.model,
            "messages": request.messages(),
            "temperature": request.params.temperature,
        });
        if let Some(seed) = request.params.seed {
            body["seed"] = seed.into();
        }
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transient { message: e.to_string(), retry_after: None })?;
        let status = response.status();
        if !status.is_success() {
            let retry_after = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            let text = response.text().unwrap_or_default();
            let message = format!("{url}: HTTP {} {}", status.as_u16(), text.chars().take(200).collect::<String>());
            return Err(match status {
                StatusCode::TOO_MANY_REQUESTS | StatusCode::REQUEST_TIMEOUT => BackendError::Transient { message, retry_after },
                s if s.is_server_error() => BackendError::Transient { message, retry_after },
                _ => BackendError::Fatal(message),
            });
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| BackendError::Fatal(format!("{url}: malformed completion response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Fatal(format!("{url}: completion response has no content")))
    }

    fn identity(&self) -> BackendIdentity {
        BackendIdentity { backend: "live".into(), model: self.config.model.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_allows_burst_then_throttles() {
        let bucket = TokenBucket::per_minute(2);
        assert_eq!(bucket.reserve(), Duration::ZERO);
        assert_eq!(bucket.reserve(), Duration::ZERO);
        let wait = bucket.reserve();
        assert!(wait > Duration::from_secs(25) && wait <= Duration::from_secs(30), "{wait:?}");
    }
}
