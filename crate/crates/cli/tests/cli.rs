use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn topicdrift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topicdrift")).args(args).output().unwrap()
}

fn sample_config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample/config.toml").display().to_string()
}

#[test]
fn validate_prints_resolved_config() {
    let out = topicdrift(&["--config", &sample_config(), "validate"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 42"), "{text}");
    assert!(text.contains("max-df-fraction = 0.95"), "{text}");
}

#[test]
fn invalid_config_exits_with_two_and_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "config-version = 1\n[corpus]\nsource = \"local\"\n[model.lda]\ntopics = 0\n").unwrap();
    let out = topicdrift(&["--config", cfg.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.matches("\n  - ").count() >= 2, "{err}");
}

#[test]
fn missing_config_file_exits_with_two() {
    let out = topicdrift(&["--config", "/nonexistent/topicdrift.toml", "validate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_without_preprocess_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = topicdrift(&["--config", &sample_config(), "--out-dir", out_dir, "-q", "fit"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("run preprocess first"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = topicdrift(&["--config", &sample_config(), "--out-dir", out_dir, "--seed", "7", "-q", "ingest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(dir.path().join("run_manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 7"), "{manifest}");
}
