use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sysrisk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sysrisk"))
        .args(args)
        .current_dir(dir)
        .env_remove("SYSRISK_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const SMALL: &str = r#"{
  "market": {
    "d": 2,
    "positions": {"kind": "beta", "a": 2, "b": 5},
    "eligible": {"kind": "match_position", "variance_ratio": 0.2}
  },
  "liabilities": {"interbank": 0.6, "to_society": 0.2},
  "beta": 0.9,
  "N": 2000,
  "seed": 11,
  "grid_step": 0.25,
  "epsilon": 1e-4,
  "kind": "corr_X",
  "sweep": [-0.3, 0.0, 0.3]
}"#;

#[test]
fn clear_prints_the_two_bank_payments() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("l.csv"), "0,0,0\n0.2,0,0.6\n0.2,0.6,0\n").unwrap();
    let out = sysrisk(&["clear", "--wealth", "0.1,1.0", "--liabilities", "l.csv", "--beta", "0.5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let p: Vec<f64> = serde_json::from_value(v["p"].clone()).unwrap();
    assert!((p[0] - 0.7).abs() < 1e-10 && (p[1] - 0.8).abs() < 1e-10);
    assert_eq!(v["defaulting_set"], serde_json::json!([1]));
    assert!((v["aggregate"].as_f64().unwrap() - 0.175).abs() < 1e-10);
}

#[test]
fn study_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), SMALL).unwrap();
    for run in ["a", "b"] {
        let out = sysrisk(&["--config", "c.json", "--out", run, "study"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let csvs: Vec<_> = names.iter().filter(|n| n.to_string_lossy().starts_with("boundary_intrinsic_")).collect();
    assert_eq!(csvs.len(), 3);
    for n in &names {
        let a = std::fs::read(dir.path().join("a").join(n)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(n)).unwrap();
        assert_eq!(a, b, "{n:?} differs");
    }
    let first = std::fs::read_to_string(dir.path().join("a").join(csvs[0])).unwrap();
    assert!(first.starts_with("# {"));
}

#[test]
fn seed_override_order() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), SMALL).unwrap();
    let risk = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sysrisk"));
        cmd.args(args).current_dir(dir.path()).env_remove("SYSRISK_SEED");
        if let Some(s) = env {
            cmd.env("SYSRISK_SEED", s);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        json(&out)["original"].as_f64().unwrap()
    };
    let config_seed = risk(&["--config", "c.json", "risk"], None);
    let flag_seed = risk(&["--config", "c.json", "--seed", "12", "risk"], None);
    assert_ne!(config_seed, flag_seed);
    assert_eq!(risk(&["--config", "c.json", "--seed", "12", "risk"], Some("11")), config_seed);
}

#[test]
fn failures_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"market": 3}"#).unwrap();
    let out = sysrisk(&["--config", "bad.json", "risk"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].is_string() && err["message"].is_string());

    let out = sysrisk(&["risk", "--frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");

    let out = sysrisk(&["--config", "missing.json", "simulate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), SMALL).unwrap();
    let out = sysrisk(&["--config", "c.json", "--out", "sim", "simulate"], dir.path());
    assert!(out.status.success());
    let positions = std::fs::read_to_string(dir.path().join("sim/positions.csv")).unwrap();
    assert_eq!(positions.lines().count(), 2001);
    let prices: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sim/initial_values.json")).unwrap()).unwrap();
    let x0 = prices["x0"][0].as_f64().unwrap();
    assert!((x0 - 2.0 / 7.0 / 1.15).abs() < 1e-15);
}
