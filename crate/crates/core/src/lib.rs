//! Privacy label generation for generative-AI code repositories.

pub mod backends;
pub mod eval;
pub mod extract;
pub mod ingest;
pub mod merge;
pub mod render;
pub mod schema;
pub mod value;
pub mod verify;
pub mod pipeline;
