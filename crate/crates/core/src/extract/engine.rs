use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FileRecord;
use crate::schema::{LabelField, LabelSection, UnitDefinition, ValueKind};
use crate::value::FieldValue;

use super::backend::{call_with_retry, BackendError, ChatMessage, CompletionBackend, CompletionRequest, RetryPolicy, Role};
use super::prompt::{build_chunk_prompt, chunk_text, PromptMode, FORMAT_REMINDER};
use super::reply::parse_reply;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionEntry {
    pub field: LabelField,
    pub value: FieldValue,
    pub reference: Option<String>,
    /// Chunk the entry was read from; 0 for unchunked files.
    pub chunk: usize,
}

impl ExtractionEntry {
    pub fn not_applicable(field: LabelField) -> Self {
        ExtractionEntry { field, value: FieldValue::NotApplicable, reference: None, chunk: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitExtraction {
    pub file_path: String,
    pub section: LabelSection,
    pub entries: Vec<ExtractionEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("completion backend unavailable: {0}")]
    BackendUnavailable(#[from] BackendError),
}

/// Everything an extraction call needs besides the unit and the file.
#[derive(Clone, Copy)]
pub struct ExtractContext<'a> {
    pub backend: &'a dyn CompletionBackend,
    pub mode: &'a PromptMode,
    pub retry: &'a RetryPolicy,
}

fn all_na(unit: &UnitDefinition) -> Vec<ExtractionEntry> {
    unit.field_ids().map(ExtractionEntry::not_applicable).collect()
}

pub fn extract_unit(
    unit: &UnitDefinition,
    file: &FileRecord,
    ctx: ExtractContext<'_>,
) -> Result<UnitExtraction, ExtractError> {
    let mut out = UnitExtraction {
        file_path: file.path.clone(),
        section: unit.section,
        entries: Vec::new(),
        diagnostics: Vec::new(),
    };
    if file.content.trim().is_empty() {
        out.entries = all_na(unit);
        return Ok(out);
    }

    let chunks = chunk_text(&file.content);
    let mut per_chunk = Vec::with_capacity(chunks.len());
    for (index, chunk) in chunks.iter().enumerate() {
        let prompt = build_chunk_prompt(unit, &file.path, chunk, index, chunks.len(), ctx.mode);
        let request = CompletionRequest::new(prompt);
        let reply = call_with_retry(ctx.backend, &request, ctx.retry)?;
        let entries = match parse_reply(&reply, unit) {
            Ok(entries) => entries,
            Err(first) => {
                let mut again = request.clone();
                again.followups = vec![
                    ChatMessage::new(Role::Assistant, reply),
                    ChatMessage::new(Role::User, FORMAT_REMINDER.trim_end()),
                ];
                let reply = call_with_retry(ctx.backend, &again, ctx.retry)?;
                match parse_reply(&reply, unit) {
                    Ok(entries) => entries,
                    Err(second) => {
                        let note = format!(
                            "{} chunk {}: unparseable reply twice ({first}; {second}); unit marked N/A",
                            unit.name(),
                            index
                        );
                        tracing::warn!(file = %file.path, "{note}");
                        out.diagnostics.push(note);
                        all_na(unit)
                    }
                }
            }
        };
        per_chunk.push(
            entries
                .into_iter()
                .map(|e| ExtractionEntry { chunk: index, ..e })
                .collect::<Vec<_>>(),
        );
    }
    out.entries = merge_chunks(unit, per_chunk);
    Ok(out)
}

/// Per field: a binary field keeps its highest-ranked chunk entry (earliest
/// on ties); a free-text field keeps every non-N/A chunk entry. A field with
/// nothing found is one N/A entry.
pub fn merge_chunks(unit: &UnitDefinition, per_chunk: Vec<Vec<ExtractionEntry>>) -> Vec<ExtractionEntry> {
    if per_chunk.len() == 1 {
        return per_chunk.into_iter().next().unwrap();
    }
    let mut merged = Vec::new();
    for field in unit.field_ids() {
        let candidates: Vec<&ExtractionEntry> = per_chunk
            .iter()
            .flatten()
            .filter(|e| e.field == field && !e.value.is_na())
            .collect();
        if candidates.is_empty() {
            merged.push(ExtractionEntry::not_applicable(field));
            continue;
        }
        match field.value_kind() {
            ValueKind::Binary => {
                let best = candidates
                    .iter()
                    .copied()
                    .reduce(|a, b| if b.value.rank() > a.value.rank() { b } else { a })
                    .unwrap();
                merged.push(best.clone());
            }
            ValueKind::FreeText => merged.extend(candidates.into_iter().cloned()),
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::backend::BackendIdentity;
    use crate::ingest::FileKind;
    use crate::schema::unit_for_section;
    use crate::value::Answer;
    use std::sync::Mutex;

    struct Scripted {
        replies: Mutex<Vec<String>>,
        seen: Mutex<Vec<CompletionRequest>>,
    }

    impl Scripted {
        fn new(replies: &[&str]) -> Self {
            Scripted {
                replies: Mutex::new(replies.iter().rev().map(|s| s.to_string()).collect()),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl CompletionBackend for Scripted {
        fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
            self.seen.lock().unwrap().push(request.clone());
            self.replies
                .lock()
                .unwrap()
                .pop()
                .ok_or_else(|| BackendError::Fatal("script exhausted".into()))
        }
        fn identity(&self) -> BackendIdentity {
            BackendIdentity { backend: "scripted".into(), model: "test".into() }
        }
    }

    fn file(content: &str) -> FileRecord {
        FileRecord { path: "app.py".into(), content: content.into(), kind: FileKind::Code, size_bytes: content.len() as u64 }
    }

    fn run(unit: &UnitDefinition, f: &FileRecord, b: &Scripted) -> Result<UnitExtraction, ExtractError> {
        extract_unit(unit, f, ExtractContext { backend: b, mode: &PromptMode::ZeroShot, retry: &RetryPolicy::no_wait(1) })
    }

    #[test]
    fn empty_file_skips_backend() {
        let unit = unit_for_section(LabelSection::DataRights);
        let b = Scripted::new(&[]);
        let out = run(&unit, &file("  \n"), &b).unwrap();
        assert_eq!(out.entries.len(), 4);
        assert!(out.entries.iter().all(|e| e.value.is_na()));
        assert!(b.seen.lock().unwrap().is_empty());
    }

    #[test]
    fn reasks_once_with_format_reminder() {
        let unit = unit_for_section(LabelSection::RiskRelated);
        let b = Scripted::new(&["no idea", "FIELD: Prompt Guardrail\nVALUE: Yes\nREFERENCE: guard()"]);
        let out = run(&unit, &file("guard()\n"), &b).unwrap();
        assert_eq!(out.entries[1].value, FieldValue::Binary(Answer::Yes));
        let seen = b.seen.lock().unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[1].followups.len(), 2);
        assert!(seen[1].followups[1].content.contains("did not follow"));
    }

    #[test]
    fn second_parse_failure_marks_unit_na() {
        let unit = unit_for_section(LabelSection::RiskRelated);
        let b = Scripted::new(&["nope", "still nope"]);
        let out = run(&unit, &file("x\n"), &b).unwrap();
        assert!(out.entries.iter().all(|e| e.value.is_na()));
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn backend_failure_surfaces() {
        let unit = unit_for_section(LabelSection::RiskRelated);
        let b = Scripted::new(&[]);
        assert!(matches!(run(&unit, &file("x\n"), &b), Err(ExtractError::BackendUnavailable(_))));
    }

    #[test]
    fn chunk_merge_prefers_yes_and_unions_text() {
        let risk = unit_for_section(LabelSection::RiskRelated);
        let e = |field, value, chunk| ExtractionEntry { field, value, reference: Some("r".into()), chunk };
        let merged = merge_chunks(
            &risk,
            vec![
                vec![
                    e(LabelField::AIGeneratedWatermarking, FieldValue::Binary(Answer::No), 0),
                    ExtractionEntry::not_applicable(LabelField::PromptGuardrail),
                    ExtractionEntry::not_applicable(LabelField::RiskNotification),
                ],
                vec![
                    e(LabelField::AIGeneratedWatermarking, FieldValue::Binary(Answer::Yes), 1),
                    ExtractionEntry::not_applicable(LabelField::PromptGuardrail),
                    e(LabelField::RiskNotification, FieldValue::Binary(Answer::No), 1),
                ],
            ],
        );
        assert_eq!(merged[0].value, FieldValue::Binary(Answer::Yes));
        assert_eq!(merged[0].chunk, 1);
        assert!(merged[1].value.is_na());
        assert_eq!(merged[2].value, FieldValue::Binary(Answer::No));

        let basic = unit_for_section(LabelSection::BasicInfo);
        let text = |v: &str, c| e(LabelField::BaseModel, FieldValue::FreeText(vec![v.into()]), c);
        let merged = merge_chunks(&basic, vec![vec![text("gpt-4", 0)], vec![text("claude", 1)]]);
        let base: Vec<_> = merged.iter().filter(|x| x.field == LabelField::BaseModel).collect();
        assert_eq!(base.len(), 2);
        assert_eq!(merged.len(), 2 + 5);
    }

    #[test]
    fn large_file_is_chunked() {
        let unit = unit_for_section(LabelSection::AdditionalInfo);
        let content = format!("{}\nkey = Fernet.generate_key()\n", "# filler line\n".repeat(3000));
        let reply_na = "FIELD: Data Encryption\nVALUE: N/A\nREFERENCE: N/A";
        let reply_yes = "FIELD: Data Encryption\nVALUE: Yes\nREFERENCE: key = Fernet.generate_key()";
        let b = Scripted::new(&[reply_na, reply_yes]);
        let out = run(&unit, &file(&content), &b).unwrap();
        assert_eq!(b.seen.lock().unwrap().len(), 2);
        assert_eq!(out.entries[0].value, FieldValue::Binary(Answer::Yes));
        assert_eq!(out.entries[0].chunk, 1);
    }
}
