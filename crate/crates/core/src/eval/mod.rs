//! Scoring predicted sheets against per-file annotations.

mod report;

pub use report::{compare_runs, format_delta, format_table, CellDelta, DeltaReport, DeltaRow};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merge::FileSheet;
use crate::schema::{LabelField, LabelSection, ValueKind};
use crate::value::{normalize_label, Answer, FieldValue};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read annotations {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("annotation row {row}: {reason}")]
    FormatError { row: u64, reason: String },
    #[error("annotation row {row}: unknown field {name:?}")]
    UnknownField { row: u64, name: String },
    #[error("annotation row {row}: duplicate entry for ({repo}, {file_path}, {field})")]
    DuplicateKey { row: u64, repo: String, file_path: String, field: String },
    #[error("prediction and annotation files differ; missing predictions: {missing:?}; unannotated predictions: {extra:?}")]
    KeyMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("cannot compare runs with different section sets")]
    SectionMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub repo: String,
    pub file_path: String,
    pub field: LabelField,
    pub value: FieldValue,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub records: Vec<AnnotationRecord>,
    /// `#` comment lines from the annotation file.
    pub notes: Vec<String>,
}

/// Files lacking some of the fifteen fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncompleteFile {
    pub repo: String,
    pub file_path: String,
    pub missing: Vec<LabelField>,
}

impl AnnotationSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (repo, file) keys in sorted order.
    pub fn files(&self) -> BTreeSet<(String, String)> {
        self.records.iter().map(|r| (r.repo.clone(), r.file_path.clone())).collect()
    }

    pub fn incomplete_files(&self) -> Vec<IncompleteFile> {
        let mut present: BTreeMap<(String, String), HashSet<LabelField>> = BTreeMap::new();
        for r in &self.records {
            present.entry((r.repo.clone(), r.file_path.clone())).or_default().insert(r.field);
        }
        present
            .into_iter()
            .filter_map(|((repo, file_path), fields)| {
                let missing: Vec<_> = LabelField::ALL.into_iter().filter(|f| !fields.contains(f)).collect();
                (!missing.is_empty()).then_some(IncompleteFile { repo, file_path, missing })
            })
            .collect()
    }

    pub fn gold(&self, repo: &str, file_path: &str, field: LabelField) -> Option<&FieldValue> {
        self.records
            .iter()
            .find(|r| r.repo == repo && r.file_path == file_path && r.field == field)
            .map(|r| &r.value)
    }
}

fn parse_gold(raw: &str, field: LabelField, row: u64) -> Result<FieldValue, EvalError> {
    let t = raw.trim();
    let na = t.is_empty() || t.eq_ignore_ascii_case("n/a") || t.eq_ignore_ascii_case("na");
    match field.value_kind() {
        ValueKind::Binary if na => Ok(FieldValue::NotApplicable),
        ValueKind::Binary if t.eq_ignore_ascii_case("yes") => Ok(FieldValue::Binary(Answer::Yes)),
        ValueKind::Binary if t.eq_ignore_ascii_case("no") => Ok(FieldValue::Binary(Answer::No)),
        ValueKind::Binary => Err(EvalError::FormatError {
            row,
            reason: format!("{} takes Yes, No or N/A, found {t:?}", field.display_name()),
        }),
        ValueKind::FreeText => {
            let values: Vec<String> = t
                .split(';')
                .map(str::trim)
                .filter(|v| !v.is_empty() && !v.eq_ignore_ascii_case("n/a"))
                .map(str::to_string)
                .collect();
            Ok(if values.is_empty() { FieldValue::NotApplicable } else { FieldValue::FreeText(values) })
        }
    }
}

/// Parses `repo,file_path,field,value` rows. Row numbers in errors are file
/// line numbers; lines starting with `#` are kept as notes.
pub fn parse_annotations(text: &str) -> Result<AnnotationSet, EvalError> {
    let notes = text
        .lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .map(|l| l.trim().to_string())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| EvalError::FormatError { row: 1, reason: e.to_string() })?
        .clone();
    let expected = ["repo", "file_path", "field", "value"];
    if headers.iter().map(|h| h.to_ascii_lowercase()).collect::<Vec<_>>() != expected {
        return Err(EvalError::FormatError {
            row: 1,
            reason: format!("header must be {}", expected.join(",")),
        });
    }
    let mut records = Vec::new();
    let mut keys = HashSet::new();
    for result in reader.records() {
        let record = result.map_err(|e| EvalError::FormatError {
            row: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line());
        let (repo, file_path, name, value) = (&record[0], &record[1], &record[2], &record[3]);
        if repo.is_empty() || file_path.is_empty() {
            return Err(EvalError::FormatError { row, reason: "repo and file_path are required".into() });
        }
        let field = LabelField::parse_name(name).ok_or_else(|| EvalError::UnknownField { row, name: name.to_string() })?;
        if !keys.insert((repo.to_string(), file_path.to_string(), field)) {
            return Err(EvalError::DuplicateKey {
                row,
                repo: repo.into(),
                file_path: file_path.into(),
                field: field.display_name().into(),
            });
        }
        records.push(AnnotationRecord {
            repo: repo.to_string(),
            file_path: file_path.to_string(),
            field,
            value: parse_gold(value, field, row)?,
        });
    }
    Ok(AnnotationSet { records, notes })
}

pub fn load_annotations(path: &Path) -> Result<AnnotationSet, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_annotations(&text)
}

/// Predicted per-file sheets for one repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoPredictions {
    pub repo: String,
    pub sheets: Vec<FileSheet>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl Scores {
    /// Precision is 1 when nothing was predicted positive and recall is 1
    /// when nothing was positive in the gold set.
    pub fn from_counts(c: Counts) -> Scores {
        let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Scores { precision, recall, f1: f1_score(precision, recall), counts: c }
    }

    fn macro_of(parts: &[Scores]) -> Scores {
        let mut counts = Counts::default();
        for p in parts {
            counts.add(p.counts);
        }
        if parts.is_empty() {
            return Scores::from_counts(counts);
        }
        let n = parts.len() as f64;
        let precision = parts.iter().map(|s| s.precision).sum::<f64>() / n;
        let recall = parts.iter().map(|s| s.recall).sum::<f64>() / n;
        Scores { precision, recall, f1: f1_score(precision, recall), counts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Pool (file, field) decisions within a section.
    Micro,
    /// Average per-field scores.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionScores {
    pub section: LabelSection,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub averaging: Averaging,
    pub per_section: Vec<SectionScores>,
    pub overall: Scores,
    pub per_field: Vec<(LabelField, Scores)>,
}

impl Metrics {
    pub fn section(&self, section: LabelSection) -> Option<&Scores> {
        self.per_section.iter().find(|s| s.section == section).map(|s| &s.scores)
    }
}

/// Collapses a file's entries for one field: highest binary answer, union of
/// free-text values.
fn predicted(sheet: &FileSheet, field: LabelField) -> FieldValue {
    let values = sheet.fields.iter().filter(|f| f.field == field).map(|f| &f.value);
    match field.value_kind() {
        ValueKind::Binary => values
            .filter(|v| !v.is_na())
            .max_by_key(|v| v.rank())
            .cloned()
            .unwrap_or(FieldValue::NotApplicable),
        ValueKind::FreeText => {
            let all: Vec<String> = values.flat_map(|v| v.labels()).collect();
            if all.is_empty() { FieldValue::NotApplicable } else { FieldValue::FreeText(all) }
        }
    }
}

/// Confusion counts for one (file, field) decision.
pub fn judge(field: LabelField, prediction: &FieldValue, gold: &FieldValue) -> Counts {
    let mut c = Counts::default();
    match field.value_kind() {
        ValueKind::Binary => {
            let p = *prediction == FieldValue::Binary(Answer::Yes);
            let g = *gold == FieldValue::Binary(Answer::Yes);
            match (p, g) {
                (true, true) => c.tp = 1,
                (true, false) => c.fp = 1,
                (false, true) => c.fn_ = 1,
                (false, false) => {}
            }
        }
        ValueKind::FreeText => {
            let p: HashSet<String> = prediction.labels().iter().map(|v| normalize_label(v)).collect();
            let g: HashSet<String> = gold.labels().iter().map(|v| normalize_label(v)).collect();
            match (p.is_empty(), g.is_empty()) {
                (false, false) if !p.is_disjoint(&g) => c.tp = 1,
                (false, false) => {
                    c.fp = 1;
                    c.fn_ = 1;
                }
                (false, true) => c.fp = 1,
                (true, false) => c.fn_ = 1,
                (true, true) => {}
            }
        }
    }
    c
}

pub fn score(predictions: &[RepoPredictions], gold: &AnnotationSet, averaging: Averaging) -> Result<Metrics, EvalError> {
    let mut sheets: BTreeMap<(String, String), &FileSheet> = BTreeMap::new();
    for repo in predictions {
        for sheet in &repo.sheets {
            sheets.insert((repo.repo.clone(), sheet.file_path.clone()), sheet);
        }
    }
    let gold_files = gold.files();
    let show = |(r, f): &(String, String)| format!("{r}:{f}");
    let missing: Vec<String> = gold_files.iter().filter(|k| !sheets.contains_key(*k)).map(show).collect();
    let extra: Vec<String> = sheets.keys().filter(|k| !gold_files.contains(*k)).map(show).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(EvalError::KeyMismatch { missing, extra });
    }

    let gold_index: BTreeMap<(&str, &str, LabelField), &FieldValue> = gold
        .records
        .iter()
        .map(|r| ((r.repo.as_str(), r.file_path.as_str(), r.field), &r.value))
        .collect();
    let mut field_counts: BTreeMap<LabelField, Counts> = LabelField::ALL.into_iter().map(|f| (f, Counts::default())).collect();
    for ((repo, path), sheet) in &sheets {
        for field in LabelField::ALL {
            let gold_value = gold_index
                .get(&(repo.as_str(), path.as_str(), field))
                .copied()
                .unwrap_or(&FieldValue::NotApplicable);
            let c = judge(field, &predicted(sheet, field), gold_value);
            field_counts.get_mut(&field).unwrap().add(c);
        }
    }

    let per_field: Vec<(LabelField, Scores)> = field_counts.iter().map(|(f, c)| (*f, Scores::from_counts(*c))).collect();
    let per_section: Vec<SectionScores> = LabelSection::ALL
        .into_iter()
        .map(|section| {
            let parts: Vec<Scores> = per_field.iter().filter(|(f, _)| f.section() == section).map(|(_, s)| *s).collect();
            let scores = match averaging {
                Averaging::Micro => {
                    let mut c = Counts::default();
                    parts.iter().for_each(|p| c.add(p.counts));
                    Scores::from_counts(c)
                }
                Averaging::Macro => Scores::macro_of(&parts),
            };
            SectionScores { section, scores }
        })
        .collect();
    let overall = match averaging {
        Averaging::Micro => {
            let mut c = Counts::default();
            per_section.iter().for_each(|s| c.add(s.scores.counts));
            Scores::from_counts(c)
        }
        Averaging::Macro => Scores::macro_of(&per_field.iter().map(|(_, s)| *s).collect::<Vec<_>>()),
    };
    Ok(Metrics { averaging, per_section, overall, per_field })
}
