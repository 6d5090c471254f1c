use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small_robot.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpc-cddp")).args(args).output().expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(&["solve", "--config", fixture().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["trajectory.csv", "covariance.csv", "constraints.csv", "summary.json", "timing.json"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("step,time,x0,x1,x2,u0,u1\n"));
    assert_eq!(traj.lines().count(), 1 + 16);
    let cov = fs::read_to_string(out.join("covariance.csv")).unwrap();
    assert!(cov.starts_with("step,time,c_0_0,c_0_1,c_0_2,c_1_1,c_1_2,c_2_2\n"));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["converged"], Value::Bool(true));
    assert!(summary["failure"].is_null());
    assert!(summary.get("wall_seconds").is_none());
}

#[test]
fn mc_reports_collision_free_count_deterministically() {
    let dir = TempDir::new().unwrap();
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&[
            "mc",
            "--config",
            fixture().to_str().unwrap(),
            "--mode",
            "mpc_gpc",
            "--realizations",
            "3",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report["n_realizations"], 3);
    assert_eq!(report["seed"], 5);
    assert!(report["collision_free_count"].as_u64().unwrap() <= 3);
    assert_eq!(report["episodes"].as_array().unwrap().len(), 3);
}

#[test]
fn mpc_writes_cycle_log() {
    let dir = TempDir::new().unwrap();
    let o = run(&["mpc", "--config", fixture().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("mpc.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 15);
    let log = read_json(&dir.path().join("log.json"));
    assert_eq!(log["entries"].as_array().unwrap().len(), 15);
}

#[test]
fn export_plot_open_loop() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "export-plot",
        "--config",
        fixture().to_str().unwrap(),
        "--realizations",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("ellipse.csv").is_file());
    assert!(dir.path().join("realizations.csv").is_file());
}

#[test]
fn export_plot_mpc() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "export-plot",
        "--config",
        fixture().to_str().unwrap(),
        "--mode",
        "mpc_deterministic",
        "--realizations",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("cycles.csv").is_file());
    assert!(dir.path().join("realizations.csv").is_file());
}

#[test]
fn validate_passes() {
    let o = run(&["validate", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn malformed_config_reports_line() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "{\n  \"name\": \"x\",\n  \"order\": 2,\n  oops\n}\n");
    let o = run(&["solve", "--config", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("line 4"), "{stderr}");
}

#[test]
fn invalid_values_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let mut cfg = read_json(&fixture());
    cfg["horizon"] = Value::from(0);
    let path = write_config(&dir, &cfg.to_string());
    let o = run(&["solve", "--config", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_and_bad_mode_exit_2() {
    let dir = TempDir::new().unwrap();
    let o = run(&["solve", "--config", "/nonexistent/scenario.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["mc", "--config", fixture().to_str().unwrap(), "--mode", "closed_loop", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["solve"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diverging_rollout_exits_1() {
    let dir = TempDir::new().unwrap();
    let mut cfg = read_json(&fixture());
    cfg["initial_state"] = serde_json::json!([1e300, 1e300, 0.0]);
    let path = write_config(&dir, &cfg.to_string());
    let o = run(&["solve", "--config", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
