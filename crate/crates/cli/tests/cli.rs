use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn maml_lqr(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maml-lqr"))
        .current_dir(cwd)
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = maml_lqr(dir.path(), &["gen-tasks", "--paper-family", "--count", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("tasks.json").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(maml_lqr(dir.path(), &["run", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn gen_tasks_then_baseline() {
    let dir = tempfile::tempdir().unwrap();
    assert!(maml_lqr(dir.path(), &["gen-tasks", "--paper-family", "--seed", "3"]).status.success());
    let out = maml_lqr(dir.path(), &["baseline", "--tasks", "tasks.json"]);
    assert!(out.status.success());
    let doc = json(&dir.path().join("baseline.json"));
    let tasks = doc["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), 10);
    assert!(tasks.iter().all(|t| t["w_star"].is_array()));
}

#[test]
fn check_bounds_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = maml_lqr(
        dir.path(),
        &["check-bounds", "--paper-family", "--w", "1.3,-2.2", "--eta", "1e-6", "--beta", "10"],
    );
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&dir.path().join("bounds.json"));
    assert_eq!(doc["verdict"]["passed"], Value::Bool(false));
    assert_eq!(doc["verdict"]["binding"], "stability_cap");

    let out = maml_lqr(
        dir.path(),
        &["check-bounds", "--paper-family", "--w", "1.3,-2.2", "--eta", "1e-20", "--out", "auto.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(json(&dir.path().join("auto.json"))["constants"]["L"].is_number());
}

#[test]
fn check_bounds_outside_stabilizing_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = maml_lqr(dir.path(), &["check-bounds", "--paper-family", "--w", "0,0", "--eta", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not stabilizing"));
    assert!(!dir.path().join("bounds.json").exists());
}

#[test]
fn wrong_policy_shape_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = maml_lqr(dir.path(), &["check-bounds", "--paper-family", "--w", "1,2,3", "--eta", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_artifacts_for_every_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = maml_lqr(dir.path(), &["run", "--max-iters", "5", "--out", "runs"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for label in ["W0_1", "W0_2", "W0_3", "W0_4"] {
        for ext in ["trace.csv", "svg", "summary.json"] {
            assert!(dir.path().join(format!("runs/{label}.{ext}")).exists());
        }
        let csv = std::fs::read_to_string(dir.path().join(format!("runs/{label}.trace.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 7);
    }
    assert_eq!(json(&dir.path().join("runs/summary.json"))["runs"].as_array().unwrap().len(), 4);
}

#[test]
fn unstable_start_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = maml_lqr(
        dir.path(),
        &["run", "--max-iters", "3", "--set", "initial_policies.0.w0=[[0,0]]", "--out", "runs"],
    );
    assert_eq!(out.status.code(), Some(1));
    let summary = json(&dir.path().join("runs/summary.json"));
    assert!(summary["runs"][0]["error"].is_string());
    assert!(summary["runs"][1]["w_final"].is_array());
}
