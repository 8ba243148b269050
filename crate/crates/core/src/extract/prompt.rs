//! Prompt construction for the extraction units.
//!
//! The template is split into the persona, terminology and instruction
//! parts (command, five rules, input and output formats). Wording lives in
//! `assets/prompt/` and is versioned by [`TEMPLATE_VERSION`].

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::FileRecord;
use crate::schema::{LabelSection, UnitDefinition};

use super::backend::{ChatMessage, Role};

pub const TEMPLATE_VERSION: &str = "v1";

pub const MAX_CHUNK_CHARS: usize = 24_000;
pub const CHUNK_OVERLAP_CHARS: usize = 500;

const PERSONA: &str = include_str!("../../assets/prompt/persona.txt");
const COMMAND: &str = include_str!("../../assets/prompt/command.txt");
const RULES: &str = include_str!("../../assets/prompt/rules.txt");
const INPUT_FORMAT: &str = include_str!("../../assets/prompt/input_format.txt");
const OUTPUT_FORMAT: &str = include_str!("../../assets/prompt/output_format.txt");
pub(crate) const FORMAT_REMINDER: &str = include_str!("../../assets/prompt/format_reminder.txt");

const CONTENT_OPEN: &str = "<<<FILE_CONTENT";
const CONTENT_CLOSE: &str = "FILE_CONTENT>>>";

/// sha256 over the template version and every template asset.
pub fn template_hash() -> &'static str {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| {
        let mut h = Sha256::new();
        for part in [TEMPLATE_VERSION, PERSONA, COMMAND, RULES, INPUT_FORMAT, OUTPUT_FORMAT, FORMAT_REMINDER] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    })
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("file payload has {chars} characters, over the {limit}-character prompt limit")]
    PayloadTooLarge { chars: usize, limit: usize },
}

#[derive(Debug, Error)]
pub enum ShotError {
    #[error("cannot read shots file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed shots file {path}: {source}")]
    Format {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// One in-context example: a file and the reply expected for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    /// Unit the example applies to; `None` applies to every unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<LabelSection>,
    #[serde(default = "default_shot_path")]
    pub path: String,
    pub input: String,
    pub output: String,
}

fn default_shot_path() -> String {
    "example.py".to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotSet {
    pub shots: Vec<Shot>,
}

impl ShotSet {
    pub fn load(path: &Path) -> Result<ShotSet, ShotError> {
        let text = fs::read_to_string(path).map_err(|source| ShotError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ShotError::Format {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn for_section(&self, section: LabelSection) -> Vec<Shot> {
        self.shots
            .iter()
            .filter(|s| s.section.is_none_or(|sec| sec == section))
            .cloned()
            .collect()
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("shots serialize");
        hex::encode(Sha256::digest(canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptMode {
    ZeroShot,
    FewShot(ShotSet),
}

impl PromptMode {
    pub fn label(&self) -> &'static str {
        match self {
            PromptMode::ZeroShot => "zero-shot",
            PromptMode::FewShot(_) => "few-shot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDocument {
    pub section: LabelSection,
    pub persona: String,
    /// (field name, explanation) for each unit field.
    pub terminology: Vec<(String, String)>,
    pub command: String,
    pub rules: Vec<String>,
    pub input_format: String,
    pub output_format: String,
    pub file_path: String,
    pub chunk_index: usize,
    pub chunk_count: usize,
    pub file_payload: String,
    pub shots: Vec<Shot>,
}

impl PromptDocument {
    pub fn system_text(&self) -> String {
        let mut out = String::new();
        out.push_str("@persona\n");
        out.push_str(self.persona.trim_end());
        out.push_str("\n\n@terminology\n");
        for (term, definition) in &self.terminology {
            out.push_str(&format!("- {term}: {definition}\n"));
        }
        out.push_str("\n@instruction\n@command\n");
        out.push_str(self.command.trim_end());
        out.push_str("\n@rule\n");
        for (i, rule) in self.rules.iter().enumerate() {
            out.push_str(&format!("@rule{}: {}\n", i + 1, rule));
        }
        out.push_str("@Input_format\n");
        out.push_str(self.input_format.trim_end());
        out.push_str("\n@Output_format\n");
        out.push_str(self.output_format.trim_end());
        out.push('\n');
        out
    }

    pub fn input_text(&self) -> String {
        render_input(&self.file_path, &self.file_payload, self.chunk_index, self.chunk_count)
    }

    /// Chat rendering: system, one user/assistant pair per shot, then the input.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut messages = vec![ChatMessage::new(Role::System, self.system_text())];
        for shot in &self.shots {
            messages.push(ChatMessage::new(Role::User, render_input(&shot.path, &shot.input, 0, 1)));
            messages.push(ChatMessage::new(Role::Assistant, shot.output.trim_end().to_string()));
        }
        messages.push(ChatMessage::new(Role::User, self.input_text()));
        messages
    }
}

fn render_input(path: &str, payload: &str, index: usize, count: usize) -> String {
    let mut out = String::from("@Input\n");
    out.push_str(&format!("File path: {path}\n"));
    if count > 1 {
        out.push_str(&format!("Chunk: {} of {}\n", index + 1, count));
    }
    out.push_str(CONTENT_OPEN);
    out.push('\n');
    out.push_str(payload);
    if !payload.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(CONTENT_CLOSE);
    out
}

fn template_rules() -> Vec<String> {
    RULES.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
}

/// Builds the prompt for a whole file; files over [`MAX_CHUNK_CHARS`] must
/// go through [`chunk_text`] and [`build_chunk_prompt`].
pub fn build_prompt(
    unit: &UnitDefinition,
    file: &FileRecord,
    mode: &PromptMode,
) -> Result<PromptDocument, PromptError> {
    let chars = file.content.chars().count();
    if chars > MAX_CHUNK_CHARS {
        return Err(PromptError::PayloadTooLarge { chars, limit: MAX_CHUNK_CHARS });
    }
    Ok(build_chunk_prompt(unit, &file.path, &file.content, 0, 1, mode))
}

pub fn build_chunk_prompt(
    unit: &UnitDefinition,
    path: &str,
    payload: &str,
    chunk_index: usize,
    chunk_count: usize,
    mode: &PromptMode,
) -> PromptDocument {
    PromptDocument {
        section: unit.section,
        persona: PERSONA.trim_end().to_string(),
        terminology: unit
            .fields
            .iter()
            .map(|(f, explanation)| (f.display_name().to_string(), explanation.to_string()))
            .collect(),
        command: COMMAND.trim_end().to_string(),
        rules: template_rules(),
        input_format: INPUT_FORMAT.trim_end().to_string(),
        output_format: OUTPUT_FORMAT.trim_end().to_string(),
        file_path: path.to_string(),
        chunk_index,
        chunk_count,
        file_payload: payload.to_string(),
        shots: match mode {
            PromptMode::ZeroShot => Vec::new(),
            PromptMode::FewShot(set) => set.for_section(unit.section),
        },
    }
}

/// Splits text into windows of at most [`MAX_CHUNK_CHARS`] characters,
/// consecutive windows sharing [`CHUNK_OVERLAP_CHARS`] characters.
pub fn chunk_text(text: &str) -> Vec<&str> {
    chunk_text_with(text, MAX_CHUNK_CHARS, CHUNK_OVERLAP_CHARS)
}

pub(crate) fn chunk_text_with(text: &str, max: usize, overlap: usize) -> Vec<&str> {
    assert!(overlap < max);
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    let chars = bounds.len() - 1;
    if chars <= max {
        return vec![text];
    }
    let step = max - overlap;
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + max).min(chars);
        chunks.push(&text[bounds[start]..bounds[end]]);
        if end == chars {
            break;
        }
        start += step;
    }
    chunks
}
