use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn v2xbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2xbench")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = v2xbench(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.lines().next().unwrap()).unwrap()
}

fn error_line(args: &[&str]) -> (i32, Value) {
    let out = v2xbench(args);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with('{')).collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    (out.status.code().unwrap(), serde_json::from_str(lines[0]).unwrap())
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn train_evaluate_aggregate_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let run = ok_json(&["train", "--task", "nfig", "--algo", "idqn", "--seed", "0", "--scale", "0.02", "--out", &out]);
    assert_eq!(run["status"], "completed");
    let run_dir = dir.path().join("nfig/idqn/0");
    let log = std::fs::read_to_string(run_dir.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 100);
    let manifest: Value = serde_json::from_slice(&std::fs::read(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!((manifest["evaluations"].as_u64(), manifest["hyperparameters"]["episodes"].as_u64()), (Some(100), Some(1000)));

    let ckpt = run_dir.join("checkpoints/final.ckpt");
    let eval = ok_json(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--out", &out, "--seed", "0", "--scale", "1"]);
    assert_eq!(eval["evaluation"]["returns"].as_array().unwrap().len(), 9);
    let logged_last: f64 = log.lines().last().unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((eval["evaluation"]["normalized_return"].as_f64().unwrap() - logged_last).abs() < 1e-9);

    let cells = ok_json(&["aggregate", "--out", &out, "--seed", "0", "--scale", "1"]);
    assert_eq!(cells[0]["seeds"], 1);
    let report = ok_json(&["report", "--out", &out, "--format", "csv,plot", "--seed", "0", "--scale", "1"]);
    assert_eq!(report["written"].as_array().unwrap().len(), 2);
    let plot = std::fs::read_to_string(dir.path().join("report/plot_data.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + 100);
}

#[test]
fn cds_emits_nine_reports() {
    let dir = tempfile::tempdir().unwrap();
    let reports = ok_json(&["cds", "--topology-set", "test", "--seed", "0", "--scale", "1", "--out", &out_arg(dir.path())]);
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 9);
    assert!(reports.iter().all(|r| (0.0..=1.0).contains(&r["d"].as_f64().unwrap())));
}

#[test]
fn oracle_emits_nine_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["oracle", "--task", "nfig", "-L", "4", "--seed", "0", "--scale", "1", "--out", &out_arg(dir.path())]);
    let rows = v["bounds"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r["g_max"].as_f64() > r["g_min"].as_f64()));
}

#[test]
fn gen_data_writes_both_sets() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["gen-data", "--samples", "30", "--seed", "3", "--scale", "1", "--out", &out_arg(dir.path())]);
    assert_eq!(v["train_samples"], 30);
    assert_eq!(v["test_topologies"].as_array().unwrap().len(), 9);
    assert!(dir.path().join("data/test_topologies.csv").exists());
}

#[test]
fn errors_are_one_json_line() {
    let (code, e) = error_line(&["train", "--bogus"]);
    assert_eq!((code, e["error"].as_str()), (2, Some("usage")));
    let (_, e) = error_line(&["train", "--algo", "dqn"]);
    assert_eq!(e["error"], "usage");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[hyper]\nlearning_rate = 1e-3\n").unwrap();
    let (code, e) = error_line(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!((code, e["error"].as_str()), (1, Some("config")));
    assert!(e["message"].as_str().unwrap().contains("valid keys"));
    let (_, e) = error_line(&["train", "--topology", "999_far", "--out", &out_arg(dir.path())]);
    assert_eq!(e["error"], "config");
    let (_, e) = error_line(&["evaluate", "--checkpoint", "/nonexistent/x.ckpt"]);
    assert_eq!(e["error"], "io");
}
