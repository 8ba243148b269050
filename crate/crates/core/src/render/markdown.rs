use std::fmt::Write;

use crate::merge::RepositoryLabel;
use crate::value::FieldValue;

fn cell(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '|' => out.push_str("\\|"),
            '\\' => out.push_str("\\\\"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => {}
            '\n' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

/// One table row per field with evidence counts.
pub fn render_markdown(label: &RepositoryLabel) -> String {
    let meta = &label.meta;
    let mut out = String::new();
    let _ = writeln!(out, "# Privacy label: {}\n", cell(&meta.repo.repo_id));
    let _ = writeln!(
        out,
        "Commit `{}`, generated {} with {} ({}, verification {}).\n",
        cell(meta.repo.resolved_commit.as_deref().unwrap_or("unknown")),
        cell(&meta.generated_at),
        cell(&meta.backend.to_string()),
        cell(&meta.mode),
        if meta.verification_enabled { "on" } else { "off" }
    );
    out.push_str("| Section | Field | Value | Evidence |\n|---|---|---|---:|\n");
    for section in &label.sections {
        for f in &section.fields {
            let value = match &f.value {
                FieldValue::FreeText(v) if v.is_empty() => "\u{2014}".to_string(),
                v => v.to_string(),
            };
            let _ = writeln!(out, "| {} | {} | {} | {} |", cell(&section.name), cell(&f.name), cell(&value), f.evidence_count);
        }
    }
    out
}
