mod common;

use std::fs;

use common::*;
use proptest::prelude::*;
use repo2label::extract::BackendIdentity;
use repo2label::merge::{assemble_repository_label, FileSheet, LabelMetadata, RepoInfo, RepositoryLabel};
use repo2label::render::{parse_machine, render, render_machine, OutputFormat, RenderOptions};
use repo2label::schema::LabelField;
use repo2label::value::{Answer, FieldValue};
use repo2label::verify::{VerificationStatus, VerifiedField};

fn meta() -> LabelMetadata {
    LabelMetadata {
        repo: RepoInfo { source: "fixture".into(), repo_id: "fixture".into(), resolved_commit: None },
        generated_at: EPOCH.into(),
        backend: BackendIdentity { backend: "test".into(), model: "none".into() },
        mode: "zero-shot".into(),
        verification_enabled: true,
    }
}

fn opts(format: OutputFormat) -> RenderOptions {
    RenderOptions { format, ..RenderOptions::default() }
}

fn sheet(path: &str, field: LabelField, value: FieldValue, reference: &str) -> FileSheet {
    FileSheet {
        file_path: path.into(),
        fields: vec![VerifiedField {
            field,
            value,
            reference: Some(reference.into()),
            status: VerificationStatus::VerifiedFirstTry,
            attempts: 1,
        }],
    }
}

fn stable_diffusion_label() -> RepositoryLabel {
    let mut label = run_replay("stable-diffusion", true).label;
    // keep the golden files independent of the checkout location
    label.meta.repo.source = "tests/fixtures/repos/stable-diffusion".into();
    label
}

#[test]
fn golden_pages() {
    let regen = std::env::var_os("REPO2LABEL_REGEN").is_some_and(|v| v == "1");
    let label = stable_diffusion_label();
    let dir = fixtures().join("golden");
    for format in OutputFormat::ALL {
        let bytes = render(&label, &opts(format));
        let path = dir.join(format!("stable-diffusion.{}", format.extension()));
        if regen {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, &bytes).unwrap();
        }
        let expected = fs::read(&path).unwrap();
        assert!(bytes == expected, "{} differs from golden; rerun with REPO2LABEL_REGEN=1", path.display());
    }
}

#[test]
fn watermark_row_and_missing_contact() {
    let label = stable_diffusion_label();
    let html = String::from_utf8(render(&label, &opts(OutputFormat::HtmlPage))).unwrap();
    let row = html.lines().find(|l| l.starts_with("<tr id=\"field-AIGeneratedWatermarking\"")).unwrap();
    assert!(row.contains("AI-generated Watermarking"));
    assert!(row.ends_with("<td class=\"value\">Yes</td></tr>"));
    let evidence_start = html.find(row).unwrap() + row.len();
    let rest = &html[evidence_start..];
    let evidence = &rest[..rest.find("</details>").unwrap()];
    assert!(evidence.contains("<tr class=\"evidence\">"));
    assert!(evidence.contains("StableDiffusionV1"));

    let contact = html.lines().find(|l| l.starts_with("<tr id=\"field-ControllerContact\"")).unwrap();
    assert!(contact.ends_with("<td class=\"value\">\u{2014}</td></tr>"));
    let md = String::from_utf8(render(&label, &opts(OutputFormat::MarkdownSummary))).unwrap();
    assert!(md.contains("| Basic Info | Controller Contact | \u{2014} | 0 |"));
    assert!(md.contains("| Risk Related | AI-generated Watermarking | Yes | 2 |"));
}

#[test]
fn babyagi_markdown_lists_base_model() {
    let label = run_replay("babyagi", true).label;
    let md = String::from_utf8(render(&label, &opts(OutputFormat::MarkdownSummary))).unwrap();
    assert!(md.contains("| Basic Info | Base Model | gpt-3.5-turbo | 1 |"));
}

#[test]
fn empty_label_has_fifteen_entries() {
    let label = assemble_repository_label(&[], meta());
    assert_eq!(label.fields().count(), 15);
    let md = String::from_utf8(render(&label, &opts(OutputFormat::MarkdownSummary))).unwrap();
    assert_eq!(md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Section")).count(), 15);
    let html = String::from_utf8(render(&label, &opts(OutputFormat::HtmlPage))).unwrap();
    assert_eq!(html.matches("<tr id=\"field-").count(), 15);
    assert!(label.fields().all(|f| f.evidence_count == 0));
}

#[test]
fn machine_round_trip_and_stable_bytes() {
    let label = stable_diffusion_label();
    let bytes = render_machine(&label);
    assert_eq!(parse_machine(&bytes).unwrap(), label);
    assert_eq!(render_machine(&label), bytes);
}

#[test]
fn evidence_cap_hides_the_rest() {
    let sheets: Vec<FileSheet> = (0..60)
        .map(|i| sheet(&format!("src/f{i:02}.py"), LabelField::DataEncryption, FieldValue::Binary(Answer::Yes), "encrypt(x)"))
        .collect();
    let label = assemble_repository_label(&sheets, meta());
    assert_eq!(label.field(LabelField::DataEncryption).evidence_count, 60);
    let html = String::from_utf8(render(&label, &opts(OutputFormat::HtmlPage))).unwrap();
    assert!(html.contains("References (60)"));
    assert_eq!(html.matches("<pre>encrypt(x)</pre>").count(), 50);
    assert!(html.contains("10 more in machine output"));
    let json = String::from_utf8(render_machine(&label)).unwrap();
    assert_eq!(json.matches("\"reference\": \"encrypt(x)\"").count(), 60);
}

fn structure(text: &str) -> [usize; 4] {
    ['<', '>', '"', '\''].map(|c| text.matches(c).count())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn excerpts_cannot_change_page_structure(reference in any::<String>(), path in "[a-z<>&\"'/ ]{1,12}", value in any::<String>()) {
        prop_assume!(!reference.trim().is_empty() && !value.trim().is_empty());
        let probe = |r: &str, p: &str, v: &str| {
            let sheets = [
                sheet(p, LabelField::BaseModel, FieldValue::FreeText(vec![v.to_string()]), r),
                sheet(p, LabelField::RiskNotification, FieldValue::Binary(Answer::Yes), r),
            ];
            let mut m = meta();
            m.repo.repo_id = v.to_string();
            assemble_repository_label(&sheets.concat_fields(), m)
        };
        let fuzzed = probe(&reference, &path, &value);
        let plain = probe("x", "p", "v");
        let html = |l: &RepositoryLabel| String::from_utf8(render(l, &opts(OutputFormat::HtmlPage))).unwrap();
        prop_assert_eq!(structure(&html(&fuzzed)), structure(&html(&plain)));

        let md = String::from_utf8(render(&fuzzed, &opts(OutputFormat::MarkdownSummary))).unwrap();
        let rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| ")).collect();
        prop_assert_eq!(rows.len(), 16);
        for row in rows {
            let unescaped = row.char_indices().filter(|&(i, c)| c == '|' && !escaped(row, i)).count();
            prop_assert_eq!(unescaped, 5, "{}", row);
        }
        prop_assert_eq!(parse_machine(&render_machine(&fuzzed)).unwrap(), fuzzed);
    }
}

/// True when the character at `i` follows an odd run of backslashes.
fn escaped(s: &str, i: usize) -> bool {
    s[..i].chars().rev().take_while(|&c| c == '\\').count() % 2 == 1
}

trait ConcatFields {
    fn concat_fields(&self) -> Vec<FileSheet>;
}

impl ConcatFields for [FileSheet; 2] {
    /// Both fields belong to the same file, so they share one sheet.
    fn concat_fields(&self) -> Vec<FileSheet> {
        let mut fields = self[0].fields.clone();
        fields.extend(self[1].fields.iter().cloned());
        vec![FileSheet { file_path: self[0].file_path.clone(), fields }]
    }
}
