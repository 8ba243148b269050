//! Run settings resolved from flags, environment, an optional TOML file and
//! built-in defaults, in that order of precedence. Flags and environment
//! variables are merged by clap before they get here.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use repo2label::backends::{LiveBackend, LiveConfig, RecordingBackend, ReplayBackend, StubBackend};
use repo2label::extract::{CompletionBackend, PromptMode, ShotSet};
use repo2label::ingest::{FetchOptions, FilterPolicy, RepoSource};
use repo2label::pipeline::RunConfig;
use repo2label::render::{OutputFormat, RenderOptions, DEFAULT_EVIDENCE_CAP};
use repo2label::verify::DEFAULT_MAX_REFLECTIONS;

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const REPLAY_EPOCH: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Stub,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendKind>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub requests_per_minute: Option<u32>,
    pub replay_dir: Option<PathBuf>,
    pub record_dir: Option<PathBuf>,
    pub shots: Option<PathBuf>,
    pub verify: Option<bool>,
    pub max_reflections: Option<u32>,
    pub parallelism: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub formats: Option<Vec<String>>,
    pub evidence_cap: Option<usize>,
    pub provenance_bubbles: Option<bool>,
    #[serde(default)]
    pub filter: FilterConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub excluded_extensions: Option<Vec<String>>,
    pub doc_extensions: Option<Vec<String>>,
    pub dataset_extensions: Option<Vec<String>>,
    pub dataset_max_bytes: Option<u64>,
    pub max_file_bytes: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("config: invalid {}", path.display()))
    }
}

/// Backend, mode and pipeline flags shared by `generate` and `evaluate`.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Completion backend.
    #[arg(long, value_enum, env = "REPO2LABEL_BACKEND")]
    pub backend: Option<BackendKind>,
    /// Chat-completion endpoint for the live backend.
    #[arg(long, env = "REPO2LABEL_BASE_URL")]
    pub base_url: Option<String>,
    #[arg(long, env = "REPO2LABEL_MODEL")]
    pub model: Option<String>,
    /// Client-side rate limit for the live backend; 0 disables it.
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    /// Transcript directory read by the replay backend.
    #[arg(long)]
    pub replay_dir: Option<PathBuf>,
    /// Record every request and reply into this directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Few-shot examples (JSON); zero-shot when absent.
    #[arg(long)]
    pub shots: Option<PathBuf>,
    /// Skip reference verification.
    #[arg(long)]
    pub no_verify: bool,
    #[arg(long)]
    pub max_reflections: Option<u32>,
    #[arg(long, short = 'j', env = "REPO2LABEL_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Extra extensions to exclude, e.g. `.ipynb`. Repeatable.
    #[arg(long = "exclude-ext", value_name = "EXT")]
    pub exclude_ext: Vec<String>,
    /// Extensions to take off the exclusion list. Repeatable.
    #[arg(long = "include-ext", value_name = "EXT")]
    pub include_ext: Vec<String>,
    #[arg(long)]
    pub max_file_bytes: Option<u64>,
    /// Timestamp written into the label (RFC 3339).
    #[arg(long)]
    pub generated_at: Option<String>,
}

fn ext(s: &str) -> String {
    let s = s.trim().to_ascii_lowercase();
    if s.starts_with('.') { s } else { format!(".{s}") }
}

fn ext_set(items: &[String]) -> BTreeSet<String> {
    items.iter().map(|s| ext(s)).collect()
}

pub fn filter_policy(args: &RunArgs, file: &FileConfig) -> Result<FilterPolicy> {
    let mut policy = FilterPolicy::default();
    let f = &file.filter;
    if let Some(v) = &f.excluded_extensions {
        policy.excluded_extensions = ext_set(v);
    }
    if let Some(v) = &f.doc_extensions {
        policy.doc_extensions = ext_set(v);
    }
    if let Some(v) = &f.dataset_extensions {
        policy.dataset_extensions = ext_set(v);
    }
    if let Some(n) = f.dataset_max_bytes {
        policy.dataset_max_bytes = n;
    }
    if let Some(n) = f.max_file_bytes {
        policy.max_file_bytes = n;
    }
    for e in &args.exclude_ext {
        policy.excluded_extensions.insert(ext(e));
    }
    for e in &args.include_ext {
        policy.excluded_extensions.remove(&ext(e));
    }
    if let Some(n) = args.max_file_bytes {
        policy.max_file_bytes = n;
    }
    policy.validate().context("config: filter policy")?;
    Ok(policy)
}

pub fn backend_kind(args: &RunArgs, file: &FileConfig) -> BackendKind {
    args.backend.or(file.backend).unwrap_or(BackendKind::Live)
}

/// Flag, then `SOURCE_DATE_EPOCH`, then a fixed epoch for replay runs,
/// then the current time.
pub fn generated_at(args: &RunArgs, kind: BackendKind) -> Result<String> {
    if let Some(ts) = &args.generated_at {
        chrono::DateTime::parse_from_rfc3339(ts).with_context(|| format!("config: --generated-at {ts:?} is not RFC 3339"))?;
        return Ok(ts.clone());
    }
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        let secs: i64 = epoch.trim().parse().with_context(|| format!("config: SOURCE_DATE_EPOCH={epoch:?}"))?;
        let ts = chrono::DateTime::from_timestamp(secs, 0).context("config: SOURCE_DATE_EPOCH out of range")?;
        return Ok(ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }
    if kind == BackendKind::Replay {
        return Ok(REPLAY_EPOCH.to_string());
    }
    Ok(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

pub fn build_backend(args: &RunArgs, file: &FileConfig) -> Result<Box<dyn CompletionBackend>> {
    let backend: Box<dyn CompletionBackend> = match backend_kind(args, file) {
        BackendKind::Stub => Box::new(StubBackend),
        BackendKind::Replay => {
            let dir = args
                .replay_dir
                .clone()
                .or_else(|| file.replay_dir.clone())
                .context("config: the replay backend needs --replay-dir")?;
            Box::new(ReplayBackend::open(&dir).map_err(|e| anyhow::anyhow!("backend: {e}"))?)
        }
        BackendKind::Live => {
            let mut config = LiveConfig::new(
                args.base_url.clone().or_else(|| file.base_url.clone()).unwrap_or_else(|| DEFAULT_BASE_URL.into()),
                args.model.clone().or_else(|| file.model.clone()).unwrap_or_else(|| DEFAULT_MODEL.into()),
            );
            if let Some(rpm) = args.requests_per_minute.or(file.requests_per_minute) {
                config.requests_per_minute = (rpm > 0).then_some(rpm);
            }
            Box::new(LiveBackend::from_env(config).map_err(|e| anyhow::anyhow!("backend: {e}"))?)
        }
    };
    match args.record.clone().or_else(|| file.record_dir.clone()) {
        Some(dir) => Ok(Box::new(RecordingBackend::new(backend, &dir).map_err(|e| anyhow::anyhow!("backend: {e}"))?)),
        None => Ok(backend),
    }
}

pub fn prompt_mode(args: &RunArgs, file: &FileConfig) -> Result<PromptMode> {
    match args.shots.clone().or_else(|| file.shots.clone()) {
        Some(path) => Ok(PromptMode::FewShot(ShotSet::load(&path).map_err(|e| anyhow::anyhow!("extraction: {e}"))?)),
        None => Ok(PromptMode::ZeroShot),
    }
}

pub fn run_config(source: &str, args: &RunArgs, file: &FileConfig) -> Result<RunConfig> {
    let source = RepoSource::parse(source).map_err(|e| anyhow::anyhow!("ingest: {e}"))?;
    let kind = backend_kind(args, file);
    let mut config = RunConfig::new(source, generated_at(args, kind)?);
    config.fetch = FetchOptions::from_env();
    config.filter = filter_policy(args, file)?;
    config.mode = prompt_mode(args, file)?;
    config.verification_enabled = !args.no_verify && file.verify.unwrap_or(true);
    config.max_reflections = args.max_reflections.or(file.max_reflections).unwrap_or(DEFAULT_MAX_REFLECTIONS);
    config.parallelism = args.parallelism.or(file.parallelism).unwrap_or(4);
    if config.parallelism == 0 {
        bail!("config: parallelism must be at least 1");
    }
    config.fetch.parallelism = config.parallelism;
    Ok(config)
}

pub fn formats(flag: &[String], file: &FileConfig) -> Result<Vec<OutputFormat>> {
    let names: Vec<String> = if !flag.is_empty() {
        flag.to_vec()
    } else if let Some(v) = &file.formats {
        v.clone()
    } else {
        return Ok(OutputFormat::ALL.to_vec());
    };
    let mut out = Vec::new();
    for name in names.iter().flat_map(|n| n.split(',')) {
        let f = OutputFormat::parse(name).with_context(|| format!("config: unknown output format {name:?}"))?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

pub fn render_options(cap: Option<usize>, no_bubbles: bool, file: &FileConfig) -> Result<RenderOptions> {
    let evidence_cap = cap.or(file.evidence_cap).unwrap_or(DEFAULT_EVIDENCE_CAP);
    if evidence_cap == 0 {
        bail!("config: evidence cap must be at least 1");
    }
    Ok(RenderOptions {
        include_provenance_bubbles: !no_bubbles && file.provenance_bubbles.unwrap_or(true),
        evidence_cap,
        ..RenderOptions::default()
    })
}
