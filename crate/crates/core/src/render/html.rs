use std::fmt::Write;

use crate::merge::{LabelFieldEntry, RepositoryLabel};
use crate::schema::field_spec;
use crate::value::FieldValue;

use super::RenderOptions;

const STYLE: &str = "\
body{font-family:system-ui,-apple-system,'Segoe UI',sans-serif;background:#f4f4f1;color:#111;margin:0;padding:24px}
.label{max-width:760px;margin:0 auto;background:#fff;border:3px solid #111;padding:12px 18px}
.label h1{font-size:28px;margin:0 0 4px;border-bottom:8px solid #111;padding-bottom:4px}
.meta{font-size:12px;color:#444;margin:0 0 8px}
.meta code{font-size:12px}
section h2{font-size:17px;margin:10px 0 0;padding:4px 0;border-bottom:3px solid #111}
table{width:100%;border-collapse:collapse}
th,td{text-align:left;padding:5px 4px;border-bottom:1px solid #999;vertical-align:top;font-size:14px}
th{width:42%;font-weight:600}
td.value{font-weight:700}
tr.evidence td{border-bottom:1px solid #ccc;padding-top:0}
details summary{cursor:pointer;font-size:12px;color:#333}
details ul{margin:4px 0;padding-left:18px}
details li{font-size:12px;margin-bottom:6px}
details pre{margin:2px 0 0;padding:4px 6px;background:#f6f6f6;border:1px solid #ddd;white-space:pre-wrap;word-break:break-word;font-size:12px}
.more{font-size:12px;color:#555;margin:2px 0}
.tip{position:relative;border-bottom:1px dotted #555;cursor:help}
.tip .bubble{display:none;position:absolute;left:0;top:100%;z-index:10;width:340px;padding:8px 10px;background:#222;color:#fff;font-size:12px;font-weight:400;line-height:1.4;border-radius:4px}
.tip:hover .bubble,.tip:focus .bubble{display:block}
.bubble ul{margin:4px 0 0;padding-left:16px}
";

/// Escapes text for element content and double-quoted attributes.
pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn display_value(value: &FieldValue) -> String {
    match value {
        FieldValue::FreeText(v) if v.is_empty() => "\u{2014}".to_string(),
        FieldValue::FreeText(v) => escape(&v.join("; ")),
        FieldValue::Binary(a) => a.to_string(),
        FieldValue::NotApplicable => "N/A".to_string(),
    }
}

fn bubble(entry: &LabelFieldEntry) -> String {
    let spec = field_spec(entry.field);
    let mut out = format!("<span class=\"bubble\">{}", escape(spec.explanation));
    if !spec.provenance.is_empty() {
        out.push_str("<ul>");
        for cite in spec.provenance {
            let _ = write!(
                out,
                "<li>{} ({}): {}</li>",
                escape(cite.regulation.short_name()),
                escape(cite.region()),
                escape(&cite.articles.join(", "))
            );
        }
        out.push_str("</ul>");
    }
    out.push_str("</span>");
    out
}

fn field_rows(out: &mut String, entry: &LabelFieldEntry, options: &RenderOptions) {
    let name = escape(&entry.name);
    let label = if options.include_provenance_bubbles {
        format!("<span class=\"tip\" tabindex=\"0\">{name}{}</span>", bubble(entry))
    } else {
        name
    };
    let _ = writeln!(
        out,
        "<tr id=\"field-{:?}\"><th>{label}</th><td class=\"value\">{}</td></tr>",
        entry.field,
        display_value(&entry.value)
    );
    if entry.evidence.is_empty() {
        return;
    }
    let cap = options.evidence_cap.max(1);
    let shown = entry.evidence.len().min(cap);
    let _ = write!(
        out,
        "<tr class=\"evidence\"><td colspan=\"2\"><details><summary>References ({})</summary><ul>",
        entry.evidence.len()
    );
    for t in &entry.evidence[..shown] {
        let _ = write!(
            out,
            "<li><code>{}</code> &rarr; {}<pre>{}</pre></li>",
            escape(&t.file_path),
            escape(&t.value),
            escape(&t.reference)
        );
    }
    out.push_str("</ul>");
    let hidden = entry.evidence.len() - shown;
    if hidden > 0 {
        let _ = write!(out, "<p class=\"more\">{hidden} more in machine output</p>");
    }
    out.push_str("</details></td></tr>\n");
}

/// Self-contained page: inline styles, hover bubbles in CSS, native
/// `<details>` for the reference lists.
pub fn render_html(label: &RepositoryLabel, options: &RenderOptions) -> String {
    let meta = &label.meta;
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>Privacy label: {}</title>", escape(&meta.repo.repo_id));
    let _ = writeln!(out, "<style>\n{STYLE}</style>\n</head>\n<body>\n<main class=\"label\">");
    out.push_str("<h1>Privacy Label</h1>\n");
    let _ = writeln!(
        out,
        "<p class=\"meta\"><strong>{}</strong> at <code>{}</code><br>generated {} with {} ({}, verification {})</p>",
        escape(&meta.repo.repo_id),
        escape(meta.repo.resolved_commit.as_deref().unwrap_or("unknown commit")),
        escape(&meta.generated_at),
        escape(&meta.backend.to_string()),
        escape(&meta.mode),
        if meta.verification_enabled { "on" } else { "off" }
    );
    for section in &label.sections {
        let _ = writeln!(out, "<section>\n<h2>{}</h2>\n<table>", escape(&section.name));
        for entry in &section.fields {
            field_rows(&mut out, entry, options);
        }
        out.push_str("</table>\n</section>\n");
    }
    out.push_str("</main>\n</body>\n</html>\n");
    out
}
