mod common;

use common::*;
use repo2label::ingest::{FetchOptions, RepoSource};
use repo2label::pipeline::{audit_against_source, AuditFailureKind};

fn audit(label: &repo2label::merge::RepositoryLabel, repo: &str) -> repo2label::pipeline::AuditReport {
    audit_against_source(label, &RepoSource::LocalPath(repo_dir(repo)), &FetchOptions::default()).unwrap()
}

#[test]
fn every_verified_label_reaudits() {
    for repo in REPOS {
        let label = run_replay(repo, true).label;
        let report = audit(&label, repo);
        assert!(report.passed(), "{repo}: {:#?}", report.failures);
        assert!(report.checked > 0, "{repo}");
    }
}

#[test]
fn corrupted_excerpt_is_reported() {
    let mut label = run_replay("babyagi", true).label;
    let entry = label.sections[0].fields.iter_mut().find(|f| f.evidence_count > 0).unwrap();
    entry.evidence[0].reference.push_str(" # edited");
    let report = audit(&label, "babyagi");
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].kind, AuditFailureKind::ReferenceNotFound);
}

#[test]
fn wrong_repository_fails() {
    let label = run_replay("babyagi", true).label;
    let report = audit(&label, "stable-diffusion");
    assert_eq!(report.failures.len(), report.checked);
    assert!(report.failures.iter().any(|f| f.kind == AuditFailureKind::MissingFile));
}

#[test]
fn unverified_run_keeps_invented_citations() {
    let label = run_replay("chat-app", false).label;
    let report = audit(&label, "chat-app");
    let bad: Vec<&str> = report.failures.iter().map(|f| f.triple.file_path.as_str()).collect();
    // label order: the README complaint (Data Rights) precedes the storage cipher
    assert_eq!(bad, vec!["README.md", "server/storage.py"]);
}
