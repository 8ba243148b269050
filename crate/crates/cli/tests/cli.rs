use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn repo(name: &str) -> String {
    fixtures().join("repos").join(name).display().to_string()
}

fn replay(name: &str) -> String {
    fixtures().join("replay").join(name).display().to_string()
}

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repo2label"))
        .args(args)
        .current_dir(cwd)
        .env_remove("REPO2LABEL_LLM_KEY")
        .env_remove("REPO2LABEL_BACKEND")
        .env_remove("REPO2LABEL_CONFIG")
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn label_json(dir: &Path, stem: &str) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join(format!("{stem}.label.json"))).unwrap()).unwrap()
}

fn field<'a>(label: &'a serde_json::Value, id: &str) -> &'a serde_json::Value {
    label["sections"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["fields"].as_array().unwrap())
        .find(|f| f["field"] == id)
        .unwrap()
}

#[test]
fn generate_with_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["generate", &repo("babyagi"), "--backend", "replay", "--replay-dir", &replay("babyagi"), "-o", "out"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let label = label_json(&tmp.path().join("out"), "babyagi");
    assert_eq!(field(&label, "BaseModel")["value"]["value"], serde_json::json!(["gpt-3.5-turbo"]));
    assert_eq!(label["generated_at"], "1970-01-01T00:00:00Z");
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("out/babyagi.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["template_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["field_attempts"].as_array().unwrap().len(), 15);
    assert!(stdout(&o).contains("3 files labelled"));
}

#[test]
fn generate_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let o = cli(&["generate", "empty", "--backend", "stub", "-o", "out", "--format", "json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let label = label_json(&tmp.path().join("out"), "empty");
    for id in ["DataRetention", "AIGeneratedWatermarking", "ProtectionOfMinors"] {
        assert_eq!(field(&label, id)["value"]["value"], "No");
        assert_eq!(field(&label, id)["evidence_count"], 0);
    }
    assert!(!tmp.path().join("out/empty.label.html").exists());
}

#[test]
fn live_backend_needs_key() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["generate", &repo("babyagi"), "--backend", "live"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("REPO2LABEL_LLM_KEY"), "{}", stderr(&o));
    assert!(stderr(&o).contains("backend:"));
}

#[test]
fn replay_without_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["generate", &repo("babyagi"), "--backend", "replay"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--replay-dir"));
    let o = cli(&["generate", &repo("babyagi"), "--backend", "replay", "--replay-dir", "nowhere"], tmp.path());
    assert!(!o.status.success());
}

#[test]
fn config_file_and_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let toml = format!(
        "backend = \"replay\"\nreplay_dir = {:?}\nformats = [\"json\"]\nout_dir = \"from-config\"\n[filter]\nmax_file_bytes = 1048576\n",
        replay("babyagi")
    );
    fs::write(tmp.path().join("r2l.toml"), toml).unwrap();
    let o = cli(&["--config", "r2l.toml", "generate", &repo("babyagi")], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let label = label_json(&tmp.path().join("from-config"), "babyagi");
    assert_eq!(label["backend"]["backend"], "replay(scripted)");

    // a flag beats the file
    let o = cli(&["--config", "r2l.toml", "generate", &repo("babyagi"), "--backend", "stub", "-o", "flag"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(label_json(&tmp.path().join("flag"), "babyagi")["backend"]["backend"], "stub");

    // so does the environment
    let o = Command::new(env!("CARGO_BIN_EXE_repo2label"))
        .args(["--config", "r2l.toml", "generate", &repo("babyagi"), "-o", "env"])
        .current_dir(tmp.path())
        .env("REPO2LABEL_BACKEND", "stub")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(label_json(&tmp.path().join("env"), "babyagi")["backend"]["backend"], "stub");

    fs::write(tmp.path().join("bad.toml"), "colour = \"blue\"\n").unwrap();
    let o = cli(&["--config", "bad.toml", "generate", &repo("babyagi")], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("config:"));
}

#[test]
fn evaluate_planted_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let annotations = fixtures().join("annotations/planted.csv").display().to_string();
    let preds = fixtures().join("predictions/planted.sheets.json").display().to_string();
    let o = cli(&["evaluate", "--annotations", &annotations, "--predictions", &preds, "--metrics-out", "m.json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("m.json")).unwrap()).unwrap();
    let overall = &m["current"]["overall"];
    assert!((overall["precision"].as_f64().unwrap() - 0.8).abs() < 1e-4);
    assert!((overall["recall"].as_f64().unwrap() - 8.0 / 9.0).abs() < 1e-4);
    assert!(stdout(&o).contains("0.80"));

    let o = cli(&["evaluate", "--annotations", "missing.csv", "--predictions", &preds], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("evaluation:"));
}

#[test]
fn evaluate_with_verification_ablation() {
    let tmp = tempfile::tempdir().unwrap();
    let annotations = fixtures().join("annotations/corpus.csv").display().to_string();
    let replay_root = fixtures().join("replay").display().to_string();
    let mut args = vec!["evaluate", "--annotations", &annotations, "--backend", "replay", "--replay-dir", &replay_root];
    let sources: Vec<String> = ["babyagi", "stable-diffusion", "chat-app"].map(repo).to_vec();
    for s in &sources {
        args.extend(["--source", s.as_str()]);
    }
    args.push("--ablate-verification");
    let o = cli(&args, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("metrics.json")).unwrap()).unwrap();
    let before = m["baseline"]["overall"]["precision"].as_f64().unwrap();
    let after = m["current"]["overall"]["precision"].as_f64().unwrap();
    assert!(after >= before);
    assert!(stdout(&o).contains("with verification"));
}

#[test]
fn catalog_views() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["catalog"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| !l.starts_with(' ') && !l.is_empty()).count(), 15);

    let o = cli(&["catalog", "--field", "Data Retention"], tmp.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("  - ")).count(), 5);

    let o = cli(&["catalog", "--field", "Favourite Colour"], tmp.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("schema:"));

    let o = cli(&["catalog", "export", "-o", "catalog.json"], tmp.path());
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("catalog.json")).unwrap()).unwrap();
    let fields: usize = doc["sections"].as_array().unwrap().iter().map(|s| s["fields"].as_array().unwrap().len()).sum();
    assert_eq!(fields, 15);
    let again = cli(&["catalog", "export"], tmp.path());
    assert_eq!(again.stdout, fs::read(tmp.path().join("catalog.json")).unwrap());
}

#[test]
fn verify_label_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["generate", &repo("babyagi"), "--backend", "replay", "--replay-dir", &replay("babyagi"), "-o", "out", "-f", "json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let label = tmp.path().join("out/babyagi.label.json").display().to_string();

    let ok = cli(&["verify-label", &label, &repo("babyagi")], tmp.path());
    assert!(ok.status.success(), "{}", stdout(&ok));

    let wrong = cli(&["verify-label", &label, &repo("chat-app")], tmp.path());
    assert!(!wrong.status.success());
    assert!(stdout(&wrong).contains("FAIL"));

    let text = fs::read_to_string(&label).unwrap();
    let corrupted = text.replacen("Questions and feedback", "Questions and complaints", 1);
    assert_ne!(text, corrupted);
    fs::write(tmp.path().join("bad.json"), corrupted).unwrap();
    let bad = cli(&["verify-label", "bad.json", &repo("babyagi")], tmp.path());
    assert!(!bad.status.success());
    assert_eq!(stdout(&bad).matches("FAIL ").count(), 1);
    assert!(stdout(&bad).contains("5 of 6 evidence excerpts verified"));
}
