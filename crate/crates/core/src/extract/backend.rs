use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::LabelField;

use super::prompt::PromptDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams { temperature: 0.0, seed: Some(42) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackendIdentity {
    pub backend: String,
    pub model: String,
}

impl fmt::Display for BackendIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.backend, self.model)
    }
}

/// One stateless request. Anything the model must remember (the failed
/// reply, a reflection instruction) travels in `followups`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: PromptDocument,
    pub followups: Vec<ChatMessage>,
    /// Field a reflection round asks about; `None` for a full-unit request.
    pub focus: Option<LabelField>,
    pub params: DecodeParams,
}

impl CompletionRequest {
    pub fn new(prompt: PromptDocument) -> Self {
        CompletionRequest {
            prompt,
            followups: Vec::new(),
            focus: None,
            params: DecodeParams::default(),
        }
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut messages = self.prompt.messages();
        messages.extend(self.followups.iter().cloned());
        messages
    }

    /// sha256 of the canonical JSON of messages and decode parameters.
    pub fn request_hash(&self) -> String {
        let canonical = serde_json::json!({
            "messages": self.messages(),
            "seed": self.params.seed,
            "temperature": self.params.temperature,
        });
        let bytes = serde_json::to_vec(&canonical).expect("request serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("transient backend failure: {message}")]
    Transient {
        message: String,
        retry_after: Option<Duration>,
    },
    #[error("backend failure: {0}")]
    Fatal(String),
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
    fn identity(&self) -> BackendIdentity;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
    fn identity(&self) -> BackendIdentity {
        (**self).identity()
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
    fn identity(&self) -> BackendIdentity {
        (**self).identity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn no_wait(max_attempts: u32) -> Self {
        RetryPolicy { max_attempts, base_delay: Duration::ZERO, max_delay: Duration::ZERO }
    }

    /// Delay before retry number `retry` (1-based): base * 2^(retry-1), capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Calls the backend, retrying transient failures with exponential backoff.
/// Returns the last error once attempts run out or on a fatal error.
pub fn call_with_retry(
    backend: &dyn CompletionBackend,
    request: &CompletionRequest,
    policy: &RetryPolicy,
) -> Result<String, BackendError> {
    let mut attempt = 1;
    loop {
        match backend.complete(request) {
            Ok(reply) => return Ok(reply),
            Err(BackendError::Transient { message, retry_after }) if attempt < policy.max_attempts => {
                let wait = retry_after.unwrap_or_else(|| policy.delay(attempt)).min(policy.max_delay);
                tracing::warn!(attempt, ?wait, %message, "retrying backend call");
                if !wait.is_zero() {
                    thread::sleep(wait);
                }
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}
