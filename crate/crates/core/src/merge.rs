//! Repository-level aggregation of per-file results.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::extract::BackendIdentity;
use crate::schema::{LabelField, LabelSection, ValueKind, SCHEMA_VERSION};
use crate::value::{normalize_label, Answer, FieldValue};
use crate::verify::VerifiedField;

/// `<file_path, label, reference>` for one contributed value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvidenceTriple {
    pub file_path: String,
    pub field: LabelField,
    pub value: String,
    pub reference: String,
}

/// Verified fields for one file across all four units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSheet {
    pub file_path: String,
    pub fields: Vec<VerifiedField>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedField {
    pub field: LabelField,
    pub value: FieldValue,
    pub evidence: Vec<EvidenceTriple>,
}

fn triples_of(field: LabelField, file_path: &str, vf: &VerifiedField) -> Vec<EvidenceTriple> {
    match (&vf.reference, vf.value.is_na()) {
        (Some(reference), false) => vf
            .value
            .labels()
            .into_iter()
            .map(|value| EvidenceTriple {
                file_path: file_path.to_string(),
                field,
                value,
                reference: reference.clone(),
            })
            .collect(),
        _ => Vec::new(),
    }
}

/// Canonical merged field for a bag of evidence: triples stably ordered by
/// file path with exact duplicates dropped, and the value recomputed.
fn from_triples(field: LabelField, mut evidence: Vec<EvidenceTriple>) -> MergedField {
    evidence.sort_by(|a, b| a.file_path.cmp(&b.file_path));
    let mut seen = HashSet::new();
    evidence.retain(|t| seen.insert(t.clone()));
    let value = match field.value_kind() {
        ValueKind::Binary => {
            let yes = evidence.iter().any(|t| t.value == Answer::Yes.to_string());
            FieldValue::Binary(if yes { Answer::Yes } else { Answer::No })
        }
        ValueKind::FreeText => {
            let mut keys = HashSet::new();
            FieldValue::FreeText(
                evidence
                    .iter()
                    .filter(|t| keys.insert(normalize_label(&t.value)))
                    .map(|t| t.value.clone())
                    .collect(),
            )
        }
    };
    MergedField { field, value, evidence }
}

/// Union over files: binary Yes if any file verified Yes, free text the
/// case-insensitive union of values ordered by file path then occurrence.
pub fn merge_field(field: LabelField, per_file: &[(String, VerifiedField)]) -> MergedField {
    let evidence = per_file
        .iter()
        .filter(|(_, vf)| vf.field == field)
        .flat_map(|(path, vf)| triples_of(field, path, vf))
        .collect();
    from_triples(field, evidence)
}

/// Combines two merge results for the same field.
pub fn join(a: &MergedField, b: &MergedField) -> MergedField {
    assert_eq!(a.field, b.field, "join across different fields");
    from_triples(a.field, a.evidence.iter().chain(&b.evidence).cloned().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoInfo {
    pub source: String,
    pub repo_id: String,
    pub resolved_commit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMetadata {
    pub repo: RepoInfo,
    pub generated_at: String,
    pub backend: BackendIdentity,
    pub mode: String,
    pub verification_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelFieldEntry {
    pub field: LabelField,
    pub name: String,
    pub value: FieldValue,
    /// Zero means nothing was found; distinguishes that from an explicit No.
    pub evidence_count: usize,
    pub evidence: Vec<EvidenceTriple>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSectionEntry {
    pub section: LabelSection,
    pub name: String,
    pub fields: Vec<LabelFieldEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryLabel {
    pub schema_version: String,
    #[serde(flatten)]
    pub meta: LabelMetadata,
    pub sections: Vec<LabelSectionEntry>,
}

impl RepositoryLabel {
    pub fn field(&self, field: LabelField) -> &LabelFieldEntry {
        self.sections
            .iter()
            .flat_map(|s| &s.fields)
            .find(|f| f.field == field)
            .expect("every field is present")
    }

    pub fn fields(&self) -> impl Iterator<Item = &LabelFieldEntry> {
        self.sections.iter().flat_map(|s| &s.fields)
    }
}

pub fn assemble_repository_label(sheets: &[FileSheet], meta: LabelMetadata) -> RepositoryLabel {
    let mut ordered: Vec<&FileSheet> = sheets.iter().collect();
    ordered.sort_by(|a, b| a.file_path.cmp(&b.file_path));
    let sections = LabelSection::ALL
        .into_iter()
        .map(|section| LabelSectionEntry {
            section,
            name: section.display_name().to_string(),
            fields: section
                .fields()
                .iter()
                .map(|&field| {
                    let per_file: Vec<(String, VerifiedField)> = ordered
                        .iter()
                        .flat_map(|s| {
                            s.fields
                                .iter()
                                .filter(move |vf| vf.field == field)
                                .map(|vf| (s.file_path.clone(), vf.clone()))
                        })
                        .collect();
                    let merged = merge_field(field, &per_file);
                    LabelFieldEntry {
                        field,
                        name: field.display_name().to_string(),
                        value: merged.value,
                        evidence_count: merged.evidence.len(),
                        evidence: merged.evidence,
                    }
                })
                .collect(),
        })
        .collect();
    RepositoryLabel { schema_version: SCHEMA_VERSION.to_string(), meta, sections }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::VerificationStatus;

    fn vf(field: LabelField, value: FieldValue, reference: &str) -> VerifiedField {
        VerifiedField {
            field,
            value,
            reference: (!reference.is_empty()).then(|| reference.to_string()),
            status: VerificationStatus::VerifiedFirstTry,
            attempts: 1,
        }
    }

    fn text(values: &[&str]) -> FieldValue {
        FieldValue::FreeText(values.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn free_text_union_in_file_order() {
        let per_file = vec![
            ("b.py".to_string(), vf(LabelField::BaseModel, text(&["gpt-3.5-turbo", "text-embedding-ada-002"]), "r2")),
            ("a.py".to_string(), vf(LabelField::BaseModel, text(&["gpt-4"]), "r1")),
            ("c.py".to_string(), vf(LabelField::BaseModel, text(&["GPT-4"]), "r3")),
        ];
        let merged = merge_field(LabelField::BaseModel, &per_file);
        assert_eq!(merged.value, text(&["gpt-4", "gpt-3.5-turbo", "text-embedding-ada-002"]));
        assert_eq!(merged.evidence.len(), 4);
    }

    #[test]
    fn binary_union() {
        let mut per_file: Vec<_> = (0..9)
            .map(|i| (format!("f{i}.py"), vf(LabelField::RightToBeForgotten, FieldValue::NotApplicable, "")))
            .collect();
        per_file.push(("z.py".into(), vf(LabelField::RightToBeForgotten, FieldValue::Binary(Answer::Yes), "delete_account()")));
        let merged = merge_field(LabelField::RightToBeForgotten, &per_file);
        assert_eq!(merged.value, FieldValue::Binary(Answer::Yes));
        assert_eq!(merged.evidence.len(), 1);

        let none = merge_field(LabelField::DataEncryption, &[("a.py".into(), vf(LabelField::DataEncryption, FieldValue::NotApplicable, ""))]);
        assert_eq!(none.value, FieldValue::Binary(Answer::No));
        assert!(none.evidence.is_empty());
    }

    fn meta() -> LabelMetadata {
        LabelMetadata {
            repo: RepoInfo { source: "x".into(), repo_id: "x".into(), resolved_commit: None },
            generated_at: "1970-01-01T00:00:00Z".into(),
            backend: BackendIdentity { backend: "stub".into(), model: "m".into() },
            mode: "zero-shot".into(),
            verification_enabled: true,
        }
    }

    #[test]
    fn empty_repo_label_is_total() {
        let label = assemble_repository_label(&[], meta());
        assert_eq!(label.fields().count(), 15);
        for f in label.fields() {
            match f.field.value_kind() {
                ValueKind::Binary => assert_eq!(f.value, FieldValue::Binary(Answer::No)),
                ValueKind::FreeText => assert_eq!(f.value, FieldValue::FreeText(vec![])),
            }
            assert_eq!(f.evidence_count, 0);
        }
    }
}
