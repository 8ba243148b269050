//! Parser for the line-oriented reply grammar:
//!
//! ```text
//! FIELD: <display name>
//! VALUE: <Yes | No | N/A | value; value; ...>
//! REFERENCE: <verbatim excerpt | N/A>
//! ```
//!
//! Blocks are separated by a blank line. A reference may span several
//! lines; it ends at a blank line or at the next `FIELD:` line. Text before
//! the first block and after the last one is ignored.

use std::collections::HashSet;

use thiserror::Error;

use crate::schema::{LabelField, UnitDefinition, ValueKind};
use crate::value::{normalize_label, Answer, FieldValue};

use super::engine::ExtractionEntry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed reply at byte {offset}: {reason}")]
pub struct ParseError {
    pub offset: usize,
    pub reason: String,
}

fn err(offset: usize, reason: impl Into<String>) -> ParseError {
    ParseError { offset, reason: reason.into() }
}

#[derive(Clone, Copy)]
struct Line<'a> {
    offset: usize,
    text: &'a str,
}

/// Returns the text after `key:` when the trimmed line starts with it.
fn keyed<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let t = line.trim_start().trim_start_matches(['*', '-', '#', ' ']);
    let head = t.get(..key.len())?;
    if !head.eq_ignore_ascii_case(key) {
        return None;
    }
    let rest = t[key.len()..].trim_start_matches('*');
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches('*').trim())
}

fn is_na(s: &str) -> bool {
    let t = s.trim().trim_end_matches('.');
    ["n/a", "na", "none", "not applicable", ""].iter().any(|n| t.eq_ignore_ascii_case(n))
}

fn parse_value(raw: &str, kind: ValueKind, offset: usize) -> Result<FieldValue, ParseError> {
    if is_na(raw) {
        return Ok(FieldValue::NotApplicable);
    }
    match kind {
        ValueKind::Binary => {
            let t = raw.trim().trim_end_matches('.');
            if t.eq_ignore_ascii_case("yes") {
                Ok(FieldValue::Binary(Answer::Yes))
            } else if t.eq_ignore_ascii_case("no") {
                Ok(FieldValue::Binary(Answer::No))
            } else {
                Err(err(offset, format!("expected Yes, No or N/A, found {raw:?}")))
            }
        }
        ValueKind::FreeText => {
            let mut seen = HashSet::new();
            let values: Vec<String> = raw
                .split(';')
                .map(str::trim)
                .filter(|v| !is_na(v))
                .filter(|v| seen.insert(normalize_label(v)))
                .map(str::to_string)
                .collect();
            Ok(if values.is_empty() {
                FieldValue::NotApplicable
            } else {
                FieldValue::FreeText(values)
            })
        }
    }
}

/// Joins reference lines, dropping one surrounding code fence.
fn clean_reference(lines: &[&str]) -> Option<String> {
    let mut lines: Vec<&str> = lines.to_vec();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.len() >= 2 && lines[0].trim().starts_with("```") && lines[lines.len() - 1].trim() == "```" {
        lines = lines[1..lines.len() - 1].to_vec();
    }
    let text = lines.join("\n");
    let trimmed = text.trim();
    if trimmed.is_empty() || is_na(trimmed) {
        None
    } else {
        Some(trimmed.to_string())
    }
}

pub fn parse_reply(text: &str, unit: &UnitDefinition) -> Result<Vec<ExtractionEntry>, ParseError> {
    let found = parse_blocks(text, unit)?;
    Ok(unit
        .fields
        .iter()
        .zip(found)
        .map(|((f, _), e)| e.unwrap_or_else(|| ExtractionEntry::not_applicable(*f)))
        .collect())
}

/// Parses a reply that should answer `field`; `None` when no block names it.
pub fn parse_field_reply(
    text: &str,
    unit: &UnitDefinition,
    field: LabelField,
) -> Result<Option<ExtractionEntry>, ParseError> {
    let found = parse_blocks(text, unit)?;
    Ok(unit
        .fields
        .iter()
        .zip(found)
        .find(|((f, _), _)| *f == field)
        .and_then(|(_, e)| e))
}

fn parse_blocks(text: &str, unit: &UnitDefinition) -> Result<Vec<Option<ExtractionEntry>>, ParseError> {
    let mut lines = Vec::new();
    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        lines.push(Line { offset, text: raw.trim_end_matches(['\n', '\r']) });
        offset += raw.len();
    }

    let mut found: Vec<Option<ExtractionEntry>> = vec![None; unit.fields.len()];
    let mut blocks = 0;
    let mut i = 0;
    while i < lines.len() {
        let Some(name) = keyed(lines[i].text, "FIELD") else {
            i += 1;
            continue;
        };
        let field_line = lines[i];
        blocks += 1;
        let field = LabelField::parse_name(name)
            .ok_or_else(|| err(field_line.offset, format!("unknown field {name:?}")))?;
        let slot = unit
            .fields
            .iter()
            .position(|(f, _)| *f == field)
            .ok_or_else(|| err(field_line.offset, format!("field {:?} is outside the {} unit", field.display_name(), unit.name())))?;
        if found[slot].is_some() {
            return Err(err(field_line.offset, format!("field {:?} answered twice", field.display_name())));
        }
        i += 1;
        while i < lines.len() && lines[i].text.trim().is_empty() {
            i += 1;
        }
        let value_line = lines
            .get(i)
            .copied()
            .ok_or_else(|| err(text.len(), format!("missing VALUE for {:?}", field.display_name())))?;
        let raw_value = keyed(value_line.text, "VALUE")
            .ok_or_else(|| err(value_line.offset, format!("expected VALUE line for {:?}", field.display_name())))?;
        let value = parse_value(raw_value, field.value_kind(), value_line.offset)?;
        i += 1;

        let mut reference = None;
        let mut j = i;
        while j < lines.len() && lines[j].text.trim().is_empty() {
            j += 1;
        }
        if let Some(first) = lines.get(j).and_then(|l| keyed(l.text, "REFERENCE")) {
            let mut ref_lines = vec![first];
            j += 1;
            let mut in_fence = first.starts_with("```");
            while j < lines.len() {
                let t = lines[j].text;
                if in_fence {
                    if t.trim() == "```" {
                        in_fence = false;
                    }
                } else if t.trim().is_empty() || keyed(t, "FIELD").is_some() {
                    break;
                }
                // an opening fence on its own line after "REFERENCE:"
                if ref_lines.len() == 1 && first.is_empty() && t.trim().starts_with("```") {
                    in_fence = true;
                }
                ref_lines.push(t);
                j += 1;
            }
            if first.is_empty() {
                ref_lines.remove(0);
            }
            reference = clean_reference(&ref_lines);
            i = j;
        }

        let value = match (value, &reference) {
            (FieldValue::NotApplicable, _) => {
                reference = None;
                FieldValue::NotApplicable
            }
            // a "No" without any citation is an absence of evidence
            (FieldValue::Binary(Answer::No), None) => FieldValue::NotApplicable,
            (v, None) => {
                return Err(err(value_line.offset, format!("{:?} = {} has no REFERENCE", field.display_name(), v)));
            }
            (v, Some(_)) => v,
        };
        found[slot] = Some(ExtractionEntry { field, value, reference, chunk: 0 });
    }

    if blocks == 0 {
        return Err(err(0, "no FIELD blocks found"));
    }
    Ok(found)
}
