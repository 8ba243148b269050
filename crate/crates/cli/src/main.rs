mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use repo2label::eval::{compare_runs, format_delta, format_table, load_annotations, score, Averaging, Metrics, RepoPredictions};
use repo2label::extract::CompletionBackend;
use repo2label::ingest::{FetchOptions, RepoSource};
use repo2label::pipeline::{audit_against_source, run_pipeline, write_outputs, AuditFailureKind, RunConfig, RunOutput};
use repo2label::render::parse_machine;
use repo2label::schema::{catalog_document, field_catalog, field_spec, LabelField, ValueKind};

use config::{FileConfig, RunArgs};

#[derive(Parser)]
#[command(name = "repo2label", version, about = "Privacy labels for generative-AI code repositories")]
struct Cli {
    /// TOML file with default settings; flags and environment win over it.
    #[arg(long, global = true, env = "REPO2LABEL_CONFIG")]
    config: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a label for one repository.
    Generate(GenerateArgs),
    /// Score predictions against annotations.
    Evaluate(EvaluateArgs),
    /// Show the label fields, their meaning and regulatory sources.
    Catalog(CatalogArgs),
    /// Re-check every evidence excerpt of a label against its repository.
    VerifyLabel(VerifyLabelArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory, archive, or `owner/name[@ref]` on the hosting service.
    source: String,
    #[command(flatten)]
    run: RunArgs,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Output formats: json, html, md. Repeatable or comma separated.
    #[arg(long = "format", short = 'f', value_name = "FORMAT")]
    formats: Vec<String>,
    /// Override the repository id used in the label and file names.
    #[arg(long)]
    repo_id: Option<String>,
    /// Evidence items shown per field in the HTML page.
    #[arg(long)]
    evidence_cap: Option<usize>,
    /// Leave out the hover bubbles in the HTML page.
    #[arg(long)]
    no_bubbles: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Annotation CSV with columns repo,file_path,field,value.
    #[arg(long)]
    annotations: PathBuf,
    /// Sheets files written by `generate` (`*.sheets.json`). Repeatable.
    #[arg(long = "predictions", value_name = "FILE")]
    predictions: Vec<PathBuf>,
    /// Sheets files of an earlier run to compare against. Repeatable.
    #[arg(long = "baseline", value_name = "FILE")]
    baseline: Vec<PathBuf>,
    /// Generate predictions for these sources instead of reading files.
    #[arg(long = "source", value_name = "SOURCE")]
    sources: Vec<String>,
    /// With --source: also run without verification and report the change.
    #[arg(long)]
    ablate_verification: bool,
    #[command(flatten)]
    run: RunArgs,
    /// Average per field instead of pooling counts.
    #[arg(long = "macro")]
    macro_average: bool,
    /// Where to write the metrics as JSON.
    #[arg(long, default_value = "metrics.json")]
    metrics_out: PathBuf,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct CatalogArgs {
    #[command(subcommand)]
    action: Option<CatalogAction>,
    /// Show a single field, e.g. "Data Retention".
    #[arg(long)]
    field: Option<String>,
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Write the schema as JSON.
    Export {
        /// Destination file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct VerifyLabelArgs {
    /// Machine-readable label (`*.label.json`).
    label: PathBuf,
    /// The repository the label was generated from.
    source: String,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_env("REPO2LABEL_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(io::stderr).with_target(false).try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = FileConfig::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Generate(args) => cmd_generate(args, &file),
        Command::Evaluate(args) => cmd_evaluate(args, &file),
        Command::Catalog(args) => cmd_catalog(args),
        Command::VerifyLabel(args) => cmd_verify_label(args),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Replay and record directories may hold one subdirectory per repository.
fn per_repo(run: &RunArgs, repo_id: &str) -> RunArgs {
    let mut run = run.clone();
    if let Some(dir) = &run.replay_dir {
        let sub = dir.join(repo_id);
        if sub.join("meta.json").is_file() {
            run.replay_dir = Some(sub);
        }
    }
    run
}

fn generate_one(
    source: &str,
    run: &RunArgs,
    file: &FileConfig,
    repo_id: Option<String>,
) -> Result<(RunConfig, RunOutput)> {
    let mut config = config::run_config(source, run, file)?;
    config.repo_id = repo_id;
    let run = per_repo(run, &config.repo_id());
    let backend: Box<dyn CompletionBackend> = config::build_backend(&run, file)?;
    let output = run_pipeline(&config, backend.as_ref())?;
    for skipped in &output.manifest.skipped_files {
        eprintln!("warning: skipped {}: {}", skipped.path, skipped.reason);
    }
    Ok((config, output))
}

fn cmd_generate(args: GenerateArgs, file: &FileConfig) -> Result<ExitCode> {
    let formats = config::formats(&args.formats, file)?;
    let options = config::render_options(args.evidence_cap, args.no_bubbles, file)?;
    let out_dir = args.out.clone().or_else(|| file.out_dir.clone()).unwrap_or_else(|| PathBuf::from("labels"));
    let (_, output) = generate_one(&args.source, &args.run, file, args.repo_id.clone())?;
    let written = write_outputs(&output, &out_dir, &formats, &options)?;
    let m = &output.manifest;
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "{}: {} files labelled, {} skipped, {} excluded ({}, {}, verification {})",
        m.repo_id,
        m.files_processed,
        m.skipped_files.len(),
        m.excluded_files.len(),
        m.backend,
        m.mode,
        if m.verification_enabled { "on" } else { "off" }
    )?;
    for path in written {
        writeln!(stdout, "wrote {}", path.display())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn load_predictions(paths: &[PathBuf]) -> Result<Vec<RepoPredictions>> {
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("evaluation: cannot read {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("evaluation: {} is not a sheets file", p.display()))
        })
        .collect()
}

fn generate_predictions(sources: &[String], run: &RunArgs, file: &FileConfig) -> Result<Vec<RepoPredictions>> {
    sources
        .iter()
        .map(|s| {
            let (_, out) = generate_one(s, run, file, None)?;
            Ok(RepoPredictions { repo: out.label.meta.repo.repo_id.clone(), sheets: out.sheets })
        })
        .collect()
}

fn cmd_evaluate(args: EvaluateArgs, file: &FileConfig) -> Result<ExitCode> {
    let gold = load_annotations(&args.annotations).map_err(|e| anyhow::anyhow!("evaluation: {e}"))?;
    for incomplete in gold.incomplete_files() {
        tracing::warn!("annotations for {incomplete:?} do not cover every field; missing ones count as N/A");
    }
    let averaging = if args.macro_average { Averaging::Macro } else { Averaging::Micro };
    let (current, baseline, names) = if !args.sources.is_empty() {
        if !args.predictions.is_empty() {
            bail!("evaluation: use either --source or --predictions");
        }
        let mut run = args.run.clone();
        run.no_verify = false;
        let current = generate_predictions(&args.sources, &run, file)?;
        let baseline = if args.ablate_verification {
            run.no_verify = true;
            run.record = None;
            Some(generate_predictions(&args.sources, &run, file)?)
        } else {
            None
        };
        (current, baseline, ("without verification", "with verification"))
    } else {
        if args.predictions.is_empty() {
            bail!("evaluation: give --predictions files or --source repositories");
        }
        let baseline = (!args.baseline.is_empty()).then(|| load_predictions(&args.baseline)).transpose()?;
        (load_predictions(&args.predictions)?, baseline, ("baseline", "current"))
    };

    let scored = |p: &[RepoPredictions]| score(p, &gold, averaging).map_err(|e| anyhow::anyhow!("evaluation: {e}"));
    let current = scored(&current)?;
    let baseline: Option<Metrics> = baseline.as_deref().map(scored).transpose()?;

    let mut stdout = io::stdout().lock();
    let mut doc = serde_json::json!({ "averaging": averaging, "current": current });
    match &baseline {
        Some(b) => {
            let delta = compare_runs(b, &current).map_err(|e| anyhow::anyhow!("evaluation: {e}"))?;
            write!(stdout, "{}\n{}", format_table(&[(names.0, b), (names.1, &current)]), format_delta(&delta))?;
            doc["baseline"] = serde_json::to_value(b)?;
            doc["delta"] = serde_json::to_value(&delta)?;
        }
        None => write!(stdout, "{}", format_table(&[(names.1, &current)]))?,
    }
    let mut json = serde_json::to_vec_pretty(&doc)?;
    json.push(b'\n');
    fs::write(&args.metrics_out, json)
        .with_context(|| format!("output: cannot write {}", args.metrics_out.display()))?;
    writeln!(stdout, "wrote {}", args.metrics_out.display())?;
    Ok(ExitCode::SUCCESS)
}

fn print_field(out: &mut impl Write, field: LabelField) -> io::Result<()> {
    let spec = field_spec(field);
    let kind = match field.value_kind() {
        ValueKind::Binary => "Yes/No",
        ValueKind::FreeText => "free text",
    };
    writeln!(out, "{} [{}, {kind}]", field.display_name(), spec.section().display_name())?;
    writeln!(out, "  {}", spec.explanation)?;
    writeln!(out, "  e.g. {}", spec.example_answer)?;
    for cite in spec.provenance {
        writeln!(out, "  - {} ({}): {}", cite.regulation.short_name(), cite.region(), cite.articles.join(", "))?;
    }
    Ok(())
}

fn cmd_catalog(args: CatalogArgs) -> Result<ExitCode> {
    let mut stdout = io::stdout().lock();
    match (args.action, args.field) {
        (Some(CatalogAction::Export { out }), _) => {
            let mut json = serde_json::to_vec_pretty(&catalog_document())?;
            json.push(b'\n');
            match out {
                Some(path) => {
                    fs::write(&path, json).with_context(|| format!("output: cannot write {}", path.display()))?;
                }
                None => stdout.write_all(&json)?,
            }
        }
        (None, Some(name)) => {
            let field = LabelField::parse_name(&name).with_context(|| format!("schema: unknown field {name:?}"))?;
            print_field(&mut stdout, field)?;
        }
        (None, None) => {
            for (i, spec) in field_catalog().iter().enumerate() {
                if i > 0 {
                    writeln!(stdout)?;
                }
                print_field(&mut stdout, spec.field)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read_label(path: &Path) -> Result<repo2label::merge::RepositoryLabel> {
    let bytes = fs::read(path).with_context(|| format!("render: cannot read {}", path.display()))?;
    parse_machine(&bytes).with_context(|| format!("render: {} is not a machine-readable label", path.display()))
}

fn cmd_verify_label(args: VerifyLabelArgs) -> Result<ExitCode> {
    let label = read_label(&args.label)?;
    let source = RepoSource::parse(&args.source).map_err(|e| anyhow::anyhow!("ingest: {e}"))?;
    let report = audit_against_source(&label, &source, &FetchOptions::from_env())?;
    let mut stdout = io::stdout().lock();
    if args.json {
        writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        for f in &report.failures {
            let why = match f.kind {
                AuditFailureKind::MissingFile => "file not found",
                AuditFailureKind::ReferenceNotFound => "excerpt not found",
            };
            writeln!(
                stdout,
                "FAIL {} {} = {} ({why})\n  {}",
                f.triple.file_path,
                f.triple.field.display_name(),
                f.triple.value,
                f.triple.reference.replace('\n', "\n  ")
            )?;
        }
        writeln!(
            stdout,
            "{} of {} evidence excerpts verified",
            report.checked - report.failures.len(),
            report.checked
        )?;
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
