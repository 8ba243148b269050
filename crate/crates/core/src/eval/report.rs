use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::schema::LabelSection;

use super::{EvalError, Metrics, Scores};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDelta {
    pub before: f64,
    pub after: f64,
    pub delta: f64,
    /// Relative change in percent; `None` when `before` is zero.
    pub percent: Option<f64>,
}

impl CellDelta {
    pub fn new(before: f64, after: f64) -> Self {
        let delta = after - before;
        CellDelta { before, after, delta, percent: (before != 0.0).then(|| delta / before * 100.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    /// Section display name, or "Overall".
    pub scope: String,
    pub precision: CellDelta,
    pub recall: CellDelta,
    pub f1: CellDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub rows: Vec<DeltaRow>,
}

impl DeltaReport {
    pub fn overall(&self) -> &DeltaRow {
        self.rows.last().expect("overall row")
    }
}

fn row(scope: &str, a: &Scores, b: &Scores) -> DeltaRow {
    DeltaRow {
        scope: scope.to_string(),
        precision: CellDelta::new(a.precision, b.precision),
        recall: CellDelta::new(a.recall, b.recall),
        f1: CellDelta::new(a.f1, b.f1),
    }
}

/// Per-section and overall changes from run `a` to run `b`.
pub fn compare_runs(a: &Metrics, b: &Metrics) -> Result<DeltaReport, EvalError> {
    let sections_a: Vec<LabelSection> = a.per_section.iter().map(|s| s.section).collect();
    let sections_b: Vec<LabelSection> = b.per_section.iter().map(|s| s.section).collect();
    if sections_a != sections_b {
        return Err(EvalError::SectionMismatch);
    }
    let mut rows: Vec<DeltaRow> = a
        .per_section
        .iter()
        .zip(&b.per_section)
        .map(|(x, y)| row(x.section.display_name(), &x.scores, &y.scores))
        .collect();
    rows.push(row("Overall", &a.overall, &b.overall));
    Ok(DeltaReport { rows })
}

fn scopes(m: &Metrics) -> Vec<(String, Scores)> {
    let mut out: Vec<(String, Scores)> = m
        .per_section
        .iter()
        .map(|s| (s.section.display_name().to_string(), s.scores))
        .collect();
    out.push(("Overall".to_string(), m.overall));
    out
}

/// Settings as rows, each scope as a Prec./Rec./F1 column group.
pub fn format_table(runs: &[(&str, &Metrics)]) -> String {
    let Some((_, first)) = runs.first() else {
        return String::new();
    };
    let width = runs.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Setting".len());
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Setting");
    for (scope, _) in scopes(first) {
        let _ = write!(out, " | {scope:^20}");
    }
    out.push('\n');
    let _ = write!(out, "{:<width$}", "");
    for _ in scopes(first) {
        let _ = write!(out, " | {:>6} {:>6} {:>6}", "Prec.", "Rec.", "F1");
    }
    out.push('\n');
    for (name, m) in runs {
        let _ = write!(out, "{name:<width$}");
        for (_, s) in scopes(m) {
            let _ = write!(out, " | {:>6.2} {:>6.2} {:>6.2}", s.precision, s.recall, s.f1);
        }
        out.push('\n');
    }
    out
}

pub fn format_delta(report: &DeltaReport) -> String {
    let pct = |c: &CellDelta| match c.percent {
        Some(p) => format!("{p:+.2}%"),
        None => "n/a".to_string(),
    };
    let mut out = String::from("Scope             | Prec. before -> after (change)     | Rec. before -> after (change)      | F1 before -> after (change)\n");
    for r in &report.rows {
        let _ = write!(out, "{:<17}", r.scope);
        for c in [&r.precision, &r.recall, &r.f1] {
            let _ = write!(out, " | {:.4} -> {:.4} ({:+.4}, {:>8})", c.before, c.after, c.delta, pct(c));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{Averaging, Counts, SectionScores};

    fn metrics(p: f64, r: f64) -> Metrics {
        let s = Scores { precision: p, recall: r, f1: super::super::f1_score(p, r), counts: Counts::default() };
        Metrics {
            averaging: Averaging::Micro,
            per_section: LabelSection::ALL.into_iter().map(|section| SectionScores { section, scores: s }).collect(),
            overall: s,
            per_field: Vec::new(),
        }
    }

    #[test]
    fn identical_runs_have_zero_deltas() {
        let m = metrics(0.5, 0.7);
        let report = compare_runs(&m, &m).unwrap();
        assert_eq!(report.rows.len(), 5);
        for r in &report.rows {
            for c in [r.precision, r.recall, r.f1] {
                assert_eq!(c.delta, 0.0);
                assert_eq!(c.percent, Some(0.0));
            }
        }
    }

    #[test]
    fn relative_change() {
        // 0.68 -> 0.81 is +19.12%
        let report = compare_runs(&metrics(0.68, 0.84), &metrics(0.81, 0.88)).unwrap();
        let p = report.overall().precision;
        assert!((p.percent.unwrap() - 19.1176).abs() < 1e-3);
        assert!(format_delta(&report).contains("+19.12%"));
        assert_eq!(CellDelta::new(0.0, 0.5).percent, None);
    }

    #[test]
    fn mismatched_sections_rejected() {
        let a = metrics(0.5, 0.5);
        let mut b = metrics(0.5, 0.5);
        b.per_section.pop();
        assert!(matches!(compare_runs(&a, &b), Err(EvalError::SectionMismatch)));
    }

    #[test]
    fn table_shape() {
        let a = metrics(0.68, 0.84);
        let table = format_table(&[("zero-shot", &a), ("zero-shot +V", &a)]);
        assert_eq!(table.lines().count(), 4);
        assert!(table.contains("Basic Info"));
        assert!(table.contains("0.68"));
    }
}
