//! End-to-end runs of the `qpurify` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn qpurify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpurify"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qpurify-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

#[test]
fn csv_carries_config_echo() {
    let out = qpurify(&["scan-gamma", "--horizon", "30"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# qpurify "));
    assert!(text.contains("# horizon = 30.0"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("gamma_over_J,"));
    assert!(!text.contains("NaN"));
}

#[test]
fn json_output_to_file() {
    let path = scratch("sim.json");
    let out = qpurify(&["simulate", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["command"], "simulate");
    assert_eq!(doc["metadata"]["events"][0]["kind"], "north-pole-reached");
    assert!(doc["rows"].as_array().unwrap().len() > 10);
}

#[test]
fn config_file_and_overrides() {
    let path = scratch("run.toml");
    std::fs::write(
        &path,
        "workers = 2\n[model]\nJ = 0.05\ngamma = 0.1\n[[sweep]]\nname = \"gamma_ratio\"\nstart = 0.0\nstop = 3.0\ncount = 4\n",
    )
    .unwrap();
    let out = qpurify(&[
        "scan-gamma",
        "--config",
        path.to_str().unwrap(),
        "--tol",
        "1e-9:1e-9",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 4);
    assert_eq!(doc["config"]["tolerances"]["abs"], 1e-9);
    assert_eq!(doc["metadata"]["J"], 0.05);
    assert!(doc["config"].get("workers").is_none());
}

#[test]
fn invalid_parameter_reports_json_error() {
    let path = scratch("bad.toml");
    std::fs::write(&path, "[model]\nomega_q = 5.0\n").unwrap();
    let out = qpurify(&["simulate", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = stderr_json(&out);
    assert_eq!(err["code"], "invalid-parameter");
    assert_eq!(err["parameter"], "omega_q");
    assert!(err["message"].as_str().unwrap().contains("omega_tls"));
}

#[test]
fn unphysical_state_and_missing_file() {
    let path = scratch("unphysical.toml");
    std::fs::write(&path, "[model]\nmu_q = 0.6\n").unwrap();
    let out = qpurify(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(stderr_json(&out)["code"], "not-positive");
    let out = qpurify(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(stderr_json(&out)["code"], "io");
}

#[test]
fn bad_sweep_axis_names_parameter() {
    let path = scratch("axis.toml");
    std::fs::write(
        &path,
        "[[sweep]]\nname = \"temperature\"\nstart = 0.0\nstop = 1.0\ncount = 5\n",
    )
    .unwrap();
    let out = qpurify(&["scan-beta", "--config", path.to_str().unwrap()]);
    let err = stderr_json(&out);
    assert_eq!(err["code"], "config");
    assert_eq!(err["parameter"], "temperature");
}

#[test]
fn usage_errors_exit_two() {
    let out = qpurify(&["scan-gamma", "--tol", "1e-9"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "usage");
    assert_eq!(qpurify(&["frobnicate"]).status.code(), Some(2));
    assert!(qpurify(&["--help"]).status.success());
}

#[test]
fn verify_exit_status_and_report() {
    let out = qpurify(&["verify", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert!(rows.iter().all(|r| r["outcome"] != "fail"));
    assert!(rows
        .iter()
        .any(|r| r["property"] == "oracle-equivalence" && r["rhs_evals"].as_u64().unwrap() > 0));
    // loose tolerances break the oracle and the exit status reports it
    let out = qpurify(&["verify", "--tol", "1e-3:1e-3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["code"], "verify-failed");
    assert!(String::from_utf8(out.stdout).unwrap().contains(",fail,"));
}

#[test]
fn every_subcommand_runs() {
    for cmd in [
        "simulate",
        "scan-gamma",
        "scan-beta",
        "region-map",
        "coherence-map",
        "purity-trace",
        "verify",
    ] {
        let out = qpurify(&[cmd, "--workers", "3"]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(!text.contains("NaN"), "{cmd}");
    }
}
