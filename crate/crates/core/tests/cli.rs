mod common;

use std::path::Path;

use common::config_path;
use dvhi::cli::{main_with_args, Config, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION};
use serde_json::Value;

fn run(config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![
        "dvhi".to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    main_with_args(args)
}

fn diagnostics(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_writes_one_row_per_node() {
    let out = tempfile::tempdir().unwrap();
    let code = run(&config_path("viscoplastic.toml"), out.path(), &["--steps", "16"]);
    assert_eq!(code, EXIT_OK);
    let csv = std::fs::read_to_string(out.path().join("trajectories.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,"), "{header}");
    assert_eq!(lines.count(), 17);
    let diag = diagnostics(out.path());
    assert_eq!(diag["status"], "ok");
    assert!(diag["margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn every_bundled_config_runs() {
    for name in ["viscoelastic_adhesive.toml", "abstract.toml"] {
        let out = tempfile::tempdir().unwrap();
        assert_eq!(
            run(&config_path(name), out.path(), &["--steps", "16"]),
            EXIT_OK,
            "{name}"
        );
    }
    let out = tempfile::tempdir().unwrap();
    let code = run(
        &config_path("viscoplastic.toml"),
        out.path(),
        &["--steps", "16", "--command", "solve-banach"],
    );
    assert_eq!(code, EXIT_OK);
    assert!(out.path().join("contraction.csv").exists());
    let out = tempfile::tempdir().unwrap();
    let code = run(
        &config_path("abstract.toml"),
        out.path(),
        &["--steps", "16", "--command", "verify"],
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(diagnostics(out.path())["verify"]["pass"], true);
}

#[test]
fn smallness_violation_stops_before_solving() {
    let out = tempfile::tempdir().unwrap();
    let code = run(&config_path("smallness_violation.toml"), out.path(), &[]);
    assert_eq!(code, EXIT_VALIDATION);
    let diag = diagnostics(out.path());
    assert_eq!(diag["status"], "validation_failure");
    let margin = diag["margin"].as_f64().unwrap();
    assert!(margin <= 0.0);
    assert!(diag["error"].as_str().unwrap().contains(&format!("{margin:.6e}")));
    assert!(!out.path().join("trajectories.csv").exists());
}

#[test]
fn lipschitz_tables_have_one_row_per_delta() {
    let out = tempfile::tempdir().unwrap();
    let code = run(&config_path("lipschitz.toml"), out.path(), &["--steps", "16"]);
    assert_eq!(code, EXIT_OK);
    let diag = diagnostics(out.path());
    let tables = diag["experiment"]["tables"].as_array().unwrap();
    assert_eq!(tables.len(), 6);
    for t in tables {
        let file = out.path().join(t["table"].as_str().unwrap());
        let csv = std::fs::read_to_string(file).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3);
        assert_eq!(t["rows"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn unknown_keys_are_listed() {
    let text = "schema_version = 1\n[run]\nstep = 4\n[solver]\ntoll = 1e-9\n";
    let err = Config::parse(text).unwrap_err().to_string();
    assert!(err.contains("run.step") && err.contains("solver.toll"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), text);
    assert_eq!(run(&path, &dir.path().join("out"), &[]), EXIT_VALIDATION);
}

#[test]
fn wrong_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "schema_version = 2\n");
    assert_eq!(run(&path, &dir.path().join("out"), &[]), EXIT_VALIDATION);
    assert!(Config::parse("schema_version = 2\n")
        .unwrap_err()
        .to_string()
        .contains("schema_version"));
}

#[test]
fn solver_failure_keeps_partial_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(config_path("viscoplastic.toml")).unwrap();
    let path = write_config(dir.path(), &format!("{base}\n[solver]\nmax_iter = 1\n"));
    let out = dir.path().join("out");
    assert_eq!(run(&path, &out, &["--steps", "8"]), EXIT_SOLVER);
    let diag = diagnostics(&out);
    assert_eq!(diag["status"], "solver_failure");
    assert!(diag["error"].as_str().is_some());
    assert!(diag["hypotheses"].is_object());
}

#[test]
fn bad_arguments_exit_with_validation_code() {
    assert_eq!(main_with_args(["dvhi"]), EXIT_VALIDATION);
    assert_eq!(main_with_args(["dvhi", "--help"]), EXIT_OK);
}
