#![allow(dead_code)]

use std::path::PathBuf;

use repo2label::backends::ReplayBackend;
use repo2label::ingest::RepoSource;
use repo2label::pipeline::{run_pipeline, RunConfig, RunOutput};

pub const EPOCH: &str = "1970-01-01T00:00:00Z";

/// Every fixture repository that has a script and recorded transcripts.
pub const REPOS: [&str; 10] = [
    "babyagi",
    "stable-diffusion",
    "chat-app",
    "chat-history",
    "rag-guardrail",
    "vision-chat",
    "text-model-card",
    "secure-platform",
    "moderation-pack",
    "verification-script",
];

/// The three repositories covered by the bundled annotations.
pub const CORPUS: [&str; 3] = ["babyagi", "stable-diffusion", "chat-app"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn repo_dir(repo: &str) -> PathBuf {
    fixtures().join("repos").join(repo)
}

pub fn replay_dir(repo: &str) -> PathBuf {
    fixtures().join("replay").join(repo)
}

pub fn script_path(repo: &str) -> PathBuf {
    fixtures().join("scripts").join(format!("{repo}.json"))
}

pub fn config(repo: &str, verify: bool) -> RunConfig {
    let mut c = RunConfig::new(RepoSource::LocalPath(repo_dir(repo)), EPOCH);
    c.verification_enabled = verify;
    c
}

pub fn run_replay(repo: &str, verify: bool) -> RunOutput {
    let backend = ReplayBackend::open(&replay_dir(repo)).expect("replay fixtures present");
    run_pipeline(&config(repo, verify), &backend).expect("pipeline run")
}
