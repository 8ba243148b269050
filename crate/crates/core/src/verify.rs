//! Reference checking and the reflection loop.

use serde::{Deserialize, Serialize};

use crate::extract::prompt::{build_chunk_prompt, chunk_text};
use crate::extract::{
    call_with_retry, parse_field_reply, ChatMessage, CompletionRequest, ExtractContext, ExtractError, ExtractionEntry,
    Role,
};
use crate::ingest::FileRecord;
use crate::schema::{LabelField, UnitDefinition};
use crate::value::FieldValue;

pub const REFLECTION_INSTRUCTION: &str = "You previously extracted a label with an incorrect reference that does not exist in the file content. Please ensure that the reference provided this time is present in the file content.";

pub const DEFAULT_MAX_REFLECTIONS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    VerifiedFirstTry,
    VerifiedAfterReflection(u32),
    #[serde(rename = "demoted_na")]
    DemotedNA,
    /// Verification was switched off for the run.
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedField {
    pub field: LabelField,
    pub value: FieldValue,
    pub reference: Option<String>,
    pub status: VerificationStatus,
    /// References checked for this field, counting the first one.
    pub attempts: u32,
}

impl VerifiedField {
    pub fn unchecked(entry: ExtractionEntry) -> Self {
        VerifiedField {
            field: entry.field,
            value: entry.value,
            reference: entry.reference,
            status: VerificationStatus::Unchecked,
            attempts: 0,
        }
    }
}

/// CRLF to LF, runs of spaces and tabs to one space, each line trimmed,
/// leading and trailing blank lines removed.
pub fn normalize(text: &str) -> String {
    let text = text.replace("\r\n", "\n");
    let lines: Vec<String> = text
        .split('\n')
        .map(|line| {
            let mut out = String::with_capacity(line.len());
            let mut in_gap = false;
            for c in line.trim_matches([' ', '\t', '\r']).chars() {
                if c == ' ' || c == '\t' {
                    if !in_gap {
                        out.push(' ');
                    }
                    in_gap = true;
                } else {
                    out.push(c);
                    in_gap = false;
                }
            }
            out
        })
        .collect();
    let start = lines.iter().position(|l| !l.is_empty()).unwrap_or(lines.len());
    let end = lines.iter().rposition(|l| !l.is_empty()).map_or(start, |i| i + 1);
    lines[start..end].join("\n")
}

/// True when the normalized reference occurs in the normalized content.
/// An empty reference never verifies.
pub fn verify_reference(reference: &str, file_content: &str) -> bool {
    let needle = normalize(reference);
    !needle.is_empty() && normalize(file_content).contains(&needle)
}

/// Normalized file content, computed once per file for repeated checks.
pub struct NormalizedContent(String);

impl NormalizedContent {
    pub fn new(content: &str) -> Self {
        NormalizedContent(normalize(content))
    }

    pub fn contains(&self, reference: &str) -> bool {
        let needle = normalize(reference);
        !needle.is_empty() && self.0.contains(&needle)
    }
}

fn render_block(entry: &ExtractionEntry) -> String {
    format!(
        "FIELD: {}\nVALUE: {}\nREFERENCE: {}",
        entry.field.display_name(),
        entry.value,
        entry.reference.as_deref().unwrap_or("N/A")
    )
}

/// The original chunk prompt followed by the rejected answer and the
/// reflection instruction for that one field.
pub fn reflection_request(unit: &UnitDefinition, file: &FileRecord, rejected: &ExtractionEntry, ctx: ExtractContext<'_>) -> CompletionRequest {
    let chunks = chunk_text(&file.content);
    let index = rejected.chunk.min(chunks.len() - 1);
    let prompt = build_chunk_prompt(unit, &file.path, chunks[index], index, chunks.len(), ctx.mode);
    let mut request = CompletionRequest::new(prompt);
    request.focus = Some(rejected.field);
    request.followups = vec![
        ChatMessage::new(Role::Assistant, render_block(rejected)),
        ChatMessage::new(
            Role::User,
            format!(
                "{REFLECTION_INSTRUCTION}\nField: {}\nRejected reference: {}\nAnswer with a single FIELD / VALUE / REFERENCE block for this field only.",
                rejected.field.display_name(),
                rejected.reference.as_deref().unwrap_or("N/A")
            ),
        ),
    ];
    request
}

/// Verifies one extracted entry, re-asking the backend up to
/// `max_reflections` times when its reference is not in the file.
pub fn verify_and_reflect(
    entry: ExtractionEntry,
    file: &FileRecord,
    unit: &UnitDefinition,
    ctx: ExtractContext<'_>,
    max_reflections: u32,
) -> Result<VerifiedField, ExtractError> {
    if entry.value.is_na() {
        return Ok(VerifiedField {
            field: entry.field,
            value: FieldValue::NotApplicable,
            reference: None,
            status: VerificationStatus::VerifiedFirstTry,
            attempts: 0,
        });
    }
    let content = NormalizedContent::new(&file.content);
    let accept = |e: &ExtractionEntry, status, attempts| VerifiedField {
        field: e.field,
        value: e.value.clone(),
        reference: e.reference.clone(),
        status,
        attempts,
    };
    if entry.reference.as_deref().is_some_and(|r| content.contains(r)) {
        return Ok(accept(&entry, VerificationStatus::VerifiedFirstTry, 1));
    }

    let original_rank = entry.value.rank();
    let mut rejected = entry.clone();
    for round in 1..=max_reflections {
        let request = reflection_request(unit, file, &rejected, ctx);
        let reply = call_with_retry(ctx.backend, &request, ctx.retry)?;
        let attempts = round + 1;
        let candidate = match parse_field_reply(&reply, unit, entry.field) {
            Ok(Some(c)) => c,
            Ok(None) | Err(_) => {
                tracing::debug!(field = %entry.field.display_name(), round, "reflection reply unusable");
                continue;
            }
        };
        let candidate = ExtractionEntry { chunk: entry.chunk, ..candidate };
        if candidate.value.is_na() {
            return Ok(accept(&candidate, VerificationStatus::VerifiedAfterReflection(round), attempts));
        }
        // reflection may confirm or lower a binary answer, never raise it
        let raised = matches!(candidate.value, FieldValue::Binary(_)) && candidate.value.rank() > original_rank;
        if !raised && candidate.reference.as_deref().is_some_and(|r| content.contains(r)) {
            return Ok(accept(&candidate, VerificationStatus::VerifiedAfterReflection(round), attempts));
        }
        rejected = candidate;
    }
    Ok(VerifiedField {
        field: entry.field,
        value: FieldValue::NotApplicable,
        reference: None,
        status: VerificationStatus::DemotedNA,
        attempts: max_reflections + 1,
    })
}
