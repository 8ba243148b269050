use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Answer {
    No,
    Yes,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "Yes",
            Answer::No => "No",
        })
    }
}

/// A per-file answer for one field. `NotApplicable` means nothing was found
/// or the answer was judged unreliable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FieldValue {
    FreeText(Vec<String>),
    Binary(Answer),
    NotApplicable,
}

impl FieldValue {
    pub fn is_na(&self) -> bool {
        matches!(self, FieldValue::NotApplicable)
    }

    /// Position in the binary lattice N/A < No < Yes. Free text counts as
    /// present (2) when it has values.
    pub fn rank(&self) -> u8 {
        match self {
            FieldValue::NotApplicable => 0,
            FieldValue::Binary(Answer::No) => 1,
            FieldValue::Binary(Answer::Yes) => 2,
            FieldValue::FreeText(v) if v.is_empty() => 0,
            FieldValue::FreeText(_) => 2,
        }
    }

    /// Labels this value contributes, one per evidence triple.
    pub fn labels(&self) -> Vec<String> {
        match self {
            FieldValue::FreeText(values) => values.clone(),
            FieldValue::Binary(a) => vec![a.to_string()],
            FieldValue::NotApplicable => Vec::new(),
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::FreeText(v) => f.write_str(&v.join("; ")),
            FieldValue::Binary(a) => write!(f, "{a}"),
            FieldValue::NotApplicable => f.write_str("N/A"),
        }
    }
}

/// Case-folded, trimmed, whitespace-collapsed form used to compare
/// free-text values.
pub fn normalize_label(value: &str) -> String {
    value
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}
