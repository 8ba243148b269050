//! Repository acquisition and file filtering.
//!
//! A [`RepoSource`] is fetched into a [`RawTree`] (every regular file with
//! its bytes), which [`filter_files`] reduces to the code and document files
//! worth sending to the extraction units.

mod local;
mod remote;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::DEFAULT_API_BASE;

/// Environment variable holding the hosting API token.
pub const VCS_TOKEN_ENV: &str = "REPO2LABEL_VCS_TOKEN";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("source not found: {0}")]
    SourceNotFound(String),
    #[error("authentication required: {0}")]
    AuthRequired(String),
    #[error("rate limited by remote host{}", retry_hint(.retry_after))]
    RateLimited { retry_after: Option<u64> },
    #[error("network error: {0}")]
    Network(String),
    #[error("unreadable archive {path}: {reason}")]
    Archive { path: String, reason: String },
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid source locator {0:?}")]
    InvalidLocator(String),
}

fn retry_hint(retry_after: &Option<u64>) -> String {
    match retry_after {
        Some(secs) => format!(" (retry after {secs}s)"),
        None => String::new(),
    }
}

/// `owner/name[@ref]` on the hosting service.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RemoteCoordinate {
    pub owner: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub git_ref: Option<String>,
}

impl RemoteCoordinate {
    pub fn parse(locator: &str) -> Result<Self, FetchError> {
        let invalid = || FetchError::InvalidLocator(locator.to_string());
        let trimmed = locator
            .trim()
            .trim_start_matches("https://github.com/")
            .trim_start_matches("http://github.com/")
            .trim_start_matches("github:")
            .trim_end_matches('/');
        let (repo, git_ref) = match trimmed.split_once('@') {
            Some((repo, r)) if !r.is_empty() => (repo, Some(r.to_string())),
            Some(_) => return Err(invalid()),
            None => (trimmed, None),
        };
        let repo = repo.trim_end_matches(".git");
        let mut parts = repo.split('/');
        let owner = parts.next().filter(|s| valid_component(s)).ok_or_else(invalid)?;
        let name = parts.next().filter(|s| valid_component(s)).ok_or_else(invalid)?;
        if parts.next().is_some() {
            return Err(invalid());
        }
        Ok(RemoteCoordinate {
            owner: owner.to_string(),
            name: name.to_string(),
            git_ref,
        })
    }
}

fn valid_component(s: &str) -> bool {
    !s.is_empty()
        && s != "."
        && s != ".."
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl fmt::Display for RemoteCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.owner, self.name)?;
        if let Some(r) = &self.git_ref {
            write!(f, "@{r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "locator", rename_all = "snake_case")]
pub enum RepoSource {
    /// A directory, or a `.tar`, `.tar.gz`, `.tgz` or `.zip` archive.
    LocalPath(PathBuf),
    RemoteRepo(RemoteCoordinate),
}

impl RepoSource {
    /// Interprets a user-supplied locator. Existing paths win; otherwise the
    /// locator must look like `owner/name[@ref]`. A `github:` prefix forces
    /// the remote interpretation.
    pub fn parse(locator: &str) -> Result<Self, FetchError> {
        if locator.trim().is_empty() {
            return Err(FetchError::InvalidLocator(locator.to_string()));
        }
        if locator.starts_with("github:") || locator.contains("github.com/") {
            return RemoteCoordinate::parse(locator).map(RepoSource::RemoteRepo);
        }
        let path = Path::new(locator);
        if path.exists() {
            return Ok(RepoSource::LocalPath(path.to_path_buf()));
        }
        match RemoteCoordinate::parse(locator) {
            Ok(coord) => Ok(RepoSource::RemoteRepo(coord)),
            Err(_) => Err(FetchError::SourceNotFound(locator.to_string())),
        }
    }

    /// Default repository identifier used to key annotations.
    pub fn default_repo_id(&self) -> String {
        match self {
            RepoSource::LocalPath(p) => {
                let name = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string());
                for ext in [".tar.gz", ".tgz", ".tar", ".zip"] {
                    if let Some(stem) = name.strip_suffix(ext) {
                        return stem.to_string();
                    }
                }
                name
            }
            RepoSource::RemoteRepo(c) => format!("{}/{}", c.owner, c.name),
        }
    }
}

impl fmt::Display for RepoSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepoSource::LocalPath(p) => write!(f, "{}", p.display()),
            RepoSource::RemoteRepo(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFile {
    /// Repo-relative, forward-slash separated.
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawTree {
    pub files: Vec<RawFile>,
    pub resolved_commit: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub token: Option<String>,
    pub api_base: String,
    pub parallelism: usize,
    /// When set, remote blobs that this policy would exclude by path or size
    /// alone are never downloaded.
    pub prefilter: Option<FilterPolicy>,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            token: None,
            api_base: DEFAULT_API_BASE.to_string(),
            parallelism: 4,
            prefilter: None,
        }
    }
}

impl FetchOptions {
    pub fn from_env() -> Self {
        FetchOptions {
            token: std::env::var(VCS_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            ..Default::default()
        }
    }
}

pub fn fetch_repository(source: &RepoSource, options: &FetchOptions) -> Result<RawTree, FetchError> {
    let mut tree = match source {
        RepoSource::LocalPath(path) => local::fetch(path)?,
        RepoSource::RemoteRepo(coord) => remote::fetch(coord, options)?,
    };
    tree.files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Code,
    Doc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    ExcludedExtension,
    TooLarge,
    LargeDataset,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Code,
    Doc,
    Excluded(ExclusionReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub content: String,
    pub kind: FileKind,
    pub size_bytes: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("extension {0:?} is both excluded and a document type")]
    Overlap(String),
    #[error("max_file_bytes must be positive")]
    ZeroLimit,
}

/// File-type filter. Extensions are matched as lowercase filename suffixes,
/// so compound entries like `.min.js` work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub excluded_extensions: BTreeSet<String>,
    pub doc_extensions: BTreeSet<String>,
    /// Tabular data: kept as documents when small, excluded when large.
    pub dataset_extensions: BTreeSet<String>,
    pub dataset_max_bytes: u64,
    pub max_file_bytes: u64,
    pub binary_sniff: bool,
}

const DEFAULT_EXCLUDED: &[&str] = &[
    // images
    ".png", ".jpg", ".jpeg", ".gif", ".svg", ".ico", ".bmp", ".webp",
    // media
    ".mp3", ".mp4", ".wav", ".mov",
    // archives
    ".zip", ".tar", ".gz", ".7z",
    // weights and embeddings
    ".bin", ".pt", ".pth", ".ckpt", ".onnx", ".safetensors", ".npz", ".npy", ".pkl", ".h5",
    // fonts
    ".ttf", ".otf", ".woff", ".woff2",
    // lockfiles and minified bundles
    ".lock", ".min.js", ".min.css",
];

const DEFAULT_DOCS: &[&str] = &[".md", ".markdown", ".rst", ".txt", ".adoc"];

const DEFAULT_DATASETS: &[&str] = &[".csv", ".tsv", ".jsonl", ".parquet"];

pub const DEFAULT_MAX_FILE_BYTES: u64 = 1024 * 1024;
pub const DEFAULT_DATASET_MAX_BYTES: u64 = 256 * 1024;

/// Bytes inspected by the binary sniff.
const SNIFF_WINDOW: usize = 8000;

impl Default for FilterPolicy {
    fn default() -> Self {
        let set = |items: &[&str]| items.iter().map(|s| s.to_string()).collect();
        FilterPolicy {
            excluded_extensions: set(DEFAULT_EXCLUDED),
            doc_extensions: set(DEFAULT_DOCS),
            dataset_extensions: set(DEFAULT_DATASETS),
            dataset_max_bytes: DEFAULT_DATASET_MAX_BYTES,
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            binary_sniff: true,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.max_file_bytes == 0 {
            return Err(PolicyError::ZeroLimit);
        }
        for ext in self.excluded_extensions.iter() {
            if self.doc_extensions.contains(ext) || self.dataset_extensions.contains(ext) {
                return Err(PolicyError::Overlap(ext.clone()));
            }
        }
        for ext in self.doc_extensions.iter() {
            if self.dataset_extensions.contains(ext) {
                return Err(PolicyError::Overlap(ext.clone()));
            }
        }
        Ok(())
    }

    /// Decision that needs only the path and size, or `None` if the bytes
    /// must be inspected.
    pub fn classify_by_path(&self, path: &str, size: u64) -> Option<Classification> {
        let name = file_name(path).to_lowercase();
        let has = |set: &BTreeSet<String>| set.iter().any(|ext| name.ends_with(ext.as_str()));
        if has(&self.excluded_extensions) {
            return Some(Classification::Excluded(ExclusionReason::ExcludedExtension));
        }
        if size > self.max_file_bytes {
            return Some(Classification::Excluded(ExclusionReason::TooLarge));
        }
        if has(&self.dataset_extensions) && size > self.dataset_max_bytes {
            return Some(Classification::Excluded(ExclusionReason::LargeDataset));
        }
        None
    }

    fn is_doc(&self, path: &str) -> bool {
        let name = file_name(path).to_lowercase();
        self.doc_extensions
            .iter()
            .chain(self.dataset_extensions.iter())
            .any(|ext| name.ends_with(ext.as_str()))
    }
}

fn file_name(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

/// Git's heuristic: a NUL byte early in the file means binary.
pub fn looks_binary(bytes: &[u8]) -> bool {
    bytes[..bytes.len().min(SNIFF_WINDOW)].contains(&0)
}

pub fn classify_file(path: &str, bytes: &[u8], policy: &FilterPolicy) -> Classification {
    if let Some(decision) = policy.classify_by_path(path, bytes.len() as u64) {
        return decision;
    }
    if policy.binary_sniff && looks_binary(bytes) {
        return Classification::Excluded(ExclusionReason::Binary);
    }
    if policy.is_doc(path) {
        Classification::Doc
    } else {
        Classification::Code
    }
}

/// Keeps code and document files, decoded lossily, sorted by path.
pub fn filter_files(tree: &RawTree, policy: &FilterPolicy) -> Vec<FileRecord> {
    let mut records: Vec<FileRecord> = tree
        .files
        .iter()
        .filter_map(|raw| {
            let kind = match classify_file(&raw.path, &raw.bytes, policy) {
                Classification::Code => FileKind::Code,
                Classification::Doc => FileKind::Doc,
                Classification::Excluded(reason) => {
                    if reason == ExclusionReason::TooLarge {
                        tracing::info!(path = %raw.path, bytes = raw.bytes.len(), "skipping oversize file");
                    } else {
                        tracing::debug!(path = %raw.path, ?reason, "excluded");
                    }
                    return None;
                }
            };
            Some(FileRecord {
                path: raw.path.clone(),
                content: String::from_utf8_lossy(&raw.bytes).into_owned(),
                kind,
                size_bytes: raw.bytes.len() as u64,
            })
        })
        .collect();
    records.sort_by(|a, b| a.path.cmp(&b.path));
    records.dedup_by(|a, b| a.path == b.path);
    records
}
