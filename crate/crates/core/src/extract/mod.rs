//! Per-unit extraction: prompt assembly, the completion backend contract,
//! and reply parsing.

pub mod backend;
pub mod engine;
pub mod prompt;
pub mod reply;

pub use backend::{
    call_with_retry, BackendError, BackendIdentity, ChatMessage, CompletionBackend, CompletionRequest, DecodeParams,
    RetryPolicy, Role,
};
pub use engine::{extract_unit, merge_chunks, ExtractContext, ExtractError, ExtractionEntry, UnitExtraction};
pub use prompt::{
    build_chunk_prompt, build_prompt, chunk_text, template_hash, PromptDocument, PromptError, PromptMode, Shot, ShotError,
    ShotSet, TEMPLATE_VERSION,
};
pub use reply::{parse_field_reply, parse_reply, ParseError};
