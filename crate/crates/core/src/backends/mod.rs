//! Completion backends: live HTTP, record/replay, scripted fixtures, and an
//! offline stub.

pub mod live;
pub mod replay;
pub mod scripted;
pub mod stub;

pub use live::{LiveBackend, LiveConfig, TokenBucket, LLM_KEY_ENV};
pub use replay::{RecordingBackend, ReplayBackend, ReplayError, Transcript, TranscriptMeta};
pub use scripted::{Script, ScriptedBackend};
pub use stub::StubBackend;
