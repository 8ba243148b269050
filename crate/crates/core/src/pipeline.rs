//! End-to-end run: ingest, per-(file, unit) extraction and verification on
//! a bounded pool, merge, and output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::RepoPredictions;
use crate::extract::{
    extract_unit, template_hash, BackendIdentity, CompletionBackend, ExtractContext, ExtractError, PromptMode,
    RetryPolicy, TEMPLATE_VERSION,
};
use crate::ingest::{
    classify_file, fetch_repository, filter_files, Classification, ExclusionReason, FetchError, FetchOptions,
    FileRecord, FilterPolicy, PolicyError, RawTree, RepoSource,
};
use crate::merge::{assemble_repository_label, EvidenceTriple, FileSheet, LabelMetadata, RepoInfo, RepositoryLabel};
use crate::render::{render, OutputFormat, RenderOptions};
use crate::schema::{all_units, LabelField, SCHEMA_VERSION};
use crate::verify::{verify_and_reflect, NormalizedContent, VerificationStatus, VerifiedField, DEFAULT_MAX_REFLECTIONS};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("ingest: {0}")]
    Fetch(#[from] FetchError),
    #[error("ingest: {0}")]
    Policy(#[from] PolicyError),
    #[error("pipeline: invalid configuration: {0}")]
    Config(String),
    #[error("output: cannot write {path}: {reason}")]
    Write { path: String, reason: String },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: RepoSource,
    /// Defaults to the source's directory or `owner/name`.
    pub repo_id: Option<String>,
    pub fetch: FetchOptions,
    pub filter: FilterPolicy,
    pub mode: PromptMode,
    pub verification_enabled: bool,
    pub max_reflections: u32,
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub generated_at: String,
}

impl RunConfig {
    pub fn new(source: RepoSource, generated_at: impl Into<String>) -> Self {
        RunConfig {
            source,
            repo_id: None,
            fetch: FetchOptions::default(),
            filter: FilterPolicy::default(),
            mode: PromptMode::ZeroShot,
            verification_enabled: true,
            max_reflections: DEFAULT_MAX_REFLECTIONS,
            parallelism: 4,
            retry: RetryPolicy::default(),
            generated_at: generated_at.into(),
        }
    }

    pub fn repo_id(&self) -> String {
        self.repo_id.clone().unwrap_or_else(|| self.source.default_repo_id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedFile {
    pub path: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldAttempts {
    pub field: LabelField,
    pub verified_first_try: u32,
    pub verified_after_reflection: u32,
    pub demoted_na: u32,
    pub unchecked: u32,
    /// References checked across all files.
    pub total_attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub schema_version: String,
    pub source: String,
    pub repo_id: String,
    pub resolved_commit: Option<String>,
    pub generated_at: String,
    pub backend: BackendIdentity,
    pub mode: String,
    pub shots_hash: Option<String>,
    pub template_version: String,
    pub template_hash: String,
    pub verification_enabled: bool,
    pub max_reflections: u32,
    pub filter_policy: FilterPolicy,
    pub files_in_tree: usize,
    pub files_processed: usize,
    pub excluded_files: Vec<ExcludedFile>,
    pub skipped_files: Vec<SkippedFile>,
    pub field_attempts: Vec<FieldAttempts>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: RepositoryLabel,
    pub sheets: Vec<FileSheet>,
    pub manifest: RunManifest,
}

struct FileResult {
    sheet: Option<FileSheet>,
    skipped: Option<SkippedFile>,
    diagnostics: Vec<String>,
}

fn process_file(file: &FileRecord, config: &RunConfig, backend: &dyn CompletionBackend) -> FileResult {
    let ctx = ExtractContext { backend, mode: &config.mode, retry: &config.retry };
    let mut fields = Vec::new();
    let mut diagnostics = Vec::new();
    for unit in all_units() {
        let result: Result<Vec<VerifiedField>, ExtractError> = extract_unit(&unit, file, ctx).and_then(|extraction| {
            diagnostics.extend(extraction.diagnostics.into_iter().map(|d| format!("{}: {d}", file.path)));
            extraction
                .entries
                .into_iter()
                .map(|entry| {
                    if config.verification_enabled {
                        verify_and_reflect(entry, file, &unit, ctx, config.max_reflections)
                    } else {
                        Ok(VerifiedField::unchecked(entry))
                    }
                })
                .collect()
        });
        match result {
            Ok(verified) => fields.extend(verified),
            Err(e) => {
                tracing::warn!(file = %file.path, unit = unit.name(), error = %e, "skipping file");
                return FileResult {
                    sheet: None,
                    skipped: Some(SkippedFile { path: file.path.clone(), reason: format!("{}: {e}", unit.name()) }),
                    diagnostics,
                };
            }
        }
    }
    FileResult {
        sheet: Some(FileSheet { file_path: file.path.clone(), fields }),
        skipped: None,
        diagnostics,
    }
}

fn attempt_summary(sheets: &[FileSheet]) -> Vec<FieldAttempts> {
    let mut by_field: BTreeMap<LabelField, FieldAttempts> = LabelField::ALL
        .into_iter()
        .map(|field| {
            let zero = FieldAttempts {
                field,
                verified_first_try: 0,
                verified_after_reflection: 0,
                demoted_na: 0,
                unchecked: 0,
                total_attempts: 0,
            };
            (field, zero)
        })
        .collect();
    for vf in sheets.iter().flat_map(|s| &s.fields) {
        let a = by_field.get_mut(&vf.field).unwrap();
        a.total_attempts += vf.attempts;
        match vf.status {
            VerificationStatus::VerifiedFirstTry => a.verified_first_try += 1,
            VerificationStatus::VerifiedAfterReflection(_) => a.verified_after_reflection += 1,
            VerificationStatus::DemotedNA => a.demoted_na += 1,
            VerificationStatus::Unchecked => a.unchecked += 1,
        }
    }
    by_field.into_values().collect()
}

pub fn run_pipeline(config: &RunConfig, backend: &dyn CompletionBackend) -> Result<RunOutput, PipelineError> {
    if config.parallelism == 0 {
        return Err(PipelineError::Config("parallelism must be at least 1".into()));
    }
    config.filter.validate()?;
    let mut fetch = config.fetch.clone();
    fetch.prefilter.get_or_insert_with(|| config.filter.clone());
    let tree = fetch_repository(&config.source, &fetch)?;
    let files = filter_files(&tree, &config.filter);
    let excluded_files: Vec<ExcludedFile> = tree
        .files
        .iter()
        .filter_map(|f| match classify_file(&f.path, &f.bytes, &config.filter) {
            Classification::Excluded(reason) => Some(ExcludedFile { path: f.path.clone(), reason }),
            _ => None,
        })
        .collect();
    tracing::info!(files = files.len(), excluded = excluded_files.len(), "ingested {}", config.source);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let results: Vec<FileResult> = pool.install(|| files.par_iter().map(|f| process_file(f, config, backend)).collect());

    let mut sheets = Vec::new();
    let mut skipped_files = Vec::new();
    let mut diagnostics = Vec::new();
    for r in results {
        sheets.extend(r.sheet);
        skipped_files.extend(r.skipped);
        diagnostics.extend(r.diagnostics);
    }

    let repo_id = config.repo_id();
    let identity = backend.identity();
    let meta = LabelMetadata {
        repo: RepoInfo {
            source: config.source.to_string(),
            repo_id: repo_id.clone(),
            resolved_commit: tree.resolved_commit.clone(),
        },
        generated_at: config.generated_at.clone(),
        backend: identity.clone(),
        mode: config.mode.label().to_string(),
        verification_enabled: config.verification_enabled,
    };
    let label = assemble_repository_label(&sheets, meta);
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: SCHEMA_VERSION.to_string(),
        source: config.source.to_string(),
        repo_id,
        resolved_commit: tree.resolved_commit,
        generated_at: config.generated_at.clone(),
        backend: identity,
        mode: config.mode.label().to_string(),
        shots_hash: match &config.mode {
            PromptMode::ZeroShot => None,
            PromptMode::FewShot(shots) => Some(shots.hash()),
        },
        template_version: TEMPLATE_VERSION.to_string(),
        template_hash: template_hash().to_string(),
        verification_enabled: config.verification_enabled,
        max_reflections: config.max_reflections,
        filter_policy: config.filter.clone(),
        files_in_tree: tree.files.len(),
        files_processed: sheets.len(),
        excluded_files,
        skipped_files,
        field_attempts: attempt_summary(&sheets),
        diagnostics,
    };
    Ok(RunOutput { label, sheets, manifest })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditFailureKind {
    MissingFile,
    ReferenceNotFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub triple: EvidenceTriple,
    pub kind: AuditFailureKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    pub failures: Vec<AuditFailure>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Re-checks every evidence triple of `label` against the files of `tree`.
pub fn audit_label(label: &RepositoryLabel, tree: &RawTree) -> AuditReport {
    let mut contents: BTreeMap<&str, Option<NormalizedContent>> =
        tree.files.iter().map(|f| (f.path.as_str(), None)).collect();
    let bytes: BTreeMap<&str, &[u8]> = tree.files.iter().map(|f| (f.path.as_str(), f.bytes.as_slice())).collect();
    let mut report = AuditReport { checked: 0, failures: Vec::new() };
    for triple in label.fields().flat_map(|e| &e.evidence) {
        report.checked += 1;
        let Some(slot) = contents.get_mut(triple.file_path.as_str()) else {
            report.failures.push(AuditFailure { triple: triple.clone(), kind: AuditFailureKind::MissingFile });
            continue;
        };
        let content = slot.get_or_insert_with(|| {
            NormalizedContent::new(&String::from_utf8_lossy(bytes[triple.file_path.as_str()]))
        });
        if !content.contains(&triple.reference) {
            report.failures.push(AuditFailure { triple: triple.clone(), kind: AuditFailureKind::ReferenceNotFound });
        }
    }
    report
}

/// Fetches `source` and audits `label` against it.
pub fn audit_against_source(
    label: &RepositoryLabel,
    source: &RepoSource,
    fetch: &FetchOptions,
) -> Result<AuditReport, PipelineError> {
    Ok(audit_label(label, &fetch_repository(source, fetch)?))
}

/// File stem for outputs: the repo id with path separators replaced.
pub fn output_stem(repo_id: &str) -> String {
    let stem: String = repo_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    if stem.is_empty() { "repository".into() } else { stem }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(|e| PipelineError::Write { path: path.display().to_string(), reason: e.to_string() })
}

fn pretty(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializes");
    out.push(b'\n');
    out
}

/// Writes the requested label formats plus `<stem>.sheets.json` and
/// `<stem>.manifest.json`; returns the written paths.
pub fn write_outputs(
    output: &RunOutput,
    dir: &Path,
    formats: &[OutputFormat],
    options: &RenderOptions,
) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::Write { path: dir.display().to_string(), reason: e.to_string() })?;
    let stem = output_stem(&output.label.meta.repo.repo_id);
    let mut written = Vec::new();
    for &format in formats {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        write_file(&path, &render(&output.label, &RenderOptions { format, ..*options }))?;
        written.push(path);
    }
    let sheets = RepoPredictions { repo: output.label.meta.repo.repo_id.clone(), sheets: output.sheets.clone() };
    for (name, bytes) in [("sheets.json", pretty(&sheets)), ("manifest.json", pretty(&output.manifest))] {
        let path = dir.join(format!("{stem}.{name}"));
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
