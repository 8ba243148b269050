//! Content-addressed request/reply transcripts.
//!
//! A transcript directory holds `meta.json` with the recorded backend
//! identity and one `<request hash>.json` per distinct request. A file may
//! list several replies; repeated identical requests get them in order and
//! the last one is reused once the list runs out.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{BackendError, BackendIdentity, ChatMessage, CompletionBackend, CompletionRequest};

pub const META_FILE: &str = "meta.json";

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("replay directory {0} does not exist")]
    MissingDir(String),
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub request_hash: String,
    pub request: RecordedRequest,
    pub replies: Vec<String>,
}

impl Transcript {
    fn path(dir: &Path, hash: &str) -> PathBuf {
        dir.join(format!("{hash}.json"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub recorded_with: BackendIdentity,
}

pub struct ReplayBackend {
    dir: PathBuf,
    recorded_with: BackendIdentity,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn open(dir: &Path) -> Result<Self, ReplayError> {
        if !dir.is_dir() {
            return Err(ReplayError::MissingDir(dir.display().to_string()));
        }
        let meta_path = dir.join(META_FILE);
        let recorded_with = match fs::read_to_string(&meta_path) {
            Ok(text) => {
                serde_json::from_str::<TranscriptMeta>(&text)
                    .map_err(|e| ReplayError::Read { path: meta_path.display().to_string(), reason: e.to_string() })?
                    .recorded_with
            }
            Err(_) => BackendIdentity { backend: "unknown".into(), model: "unknown".into() },
        };
        Ok(ReplayBackend { dir: dir.to_path_buf(), recorded_with, cursors: Mutex::new(HashMap::new()) })
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let hash = request.request_hash();
        let path = Transcript::path(&self.dir, &hash);
        let text = fs::read_to_string(&path).map_err(|_| {
            BackendError::Fatal(format!("no replay transcript for request {hash} in {}", self.dir.display()))
        })?;
        let transcript: Transcript = serde_json::from_str(&text)
            .map_err(|e| BackendError::Fatal(format!("corrupt transcript {}: {e}", path.display())))?;
        if transcript.replies.is_empty() {
            return Err(BackendError::Fatal(format!("transcript {} has no replies", path.display())));
        }
        let mut cursors = self.cursors.lock().unwrap();
        let cursor = cursors.entry(hash).or_insert(0);
        let reply = transcript.replies[(*cursor).min(transcript.replies.len() - 1)].clone();
        *cursor += 1;
        Ok(reply)
    }

    fn identity(&self) -> BackendIdentity {
        BackendIdentity {
            backend: format!("replay({})", self.recorded_with.backend),
            model: self.recorded_with.model.clone(),
        }
    }
}

/// Passes requests to an inner backend and writes every exchange to a
/// transcript directory readable by [`ReplayBackend`].
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
    log: Mutex<HashMap<String, Transcript>>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: &Path) -> Result<Self, ReplayError> {
        let werr = |e: std::io::Error| ReplayError::Write { path: dir.display().to_string(), reason: e.to_string() };
        fs::create_dir_all(dir).map_err(werr)?;
        let meta = TranscriptMeta { recorded_with: inner.identity() };
        let body = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        fs::write(dir.join(META_FILE), body).map_err(werr)?;
        Ok(RecordingBackend { inner, dir: dir.to_path_buf(), log: Mutex::new(HashMap::new()) })
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let reply = self.inner.complete(request)?;
        let hash = request.request_hash();
        let mut log = self.log.lock().unwrap();
        let transcript = log.entry(hash.clone()).or_insert_with(|| Transcript {
            request_hash: hash.clone(),
            request: RecordedRequest {
                messages: request.messages(),
                temperature: request.params.temperature,
                seed: request.params.seed,
            },
            replies: Vec::new(),
        });
        transcript.replies.push(reply.clone());
        let body = serde_json::to_string_pretty(transcript).expect("transcript serializes") + "\n";
        let path = Transcript::path(&self.dir, &hash);
        fs::write(&path, body).map_err(|e| BackendError::Fatal(format!("cannot write {}: {e}", path.display())))?;
        Ok(reply)
    }

    fn identity(&self) -> BackendIdentity {
        self.inner.identity()
    }
}
