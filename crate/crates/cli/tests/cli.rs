use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
    "name": "smoke",
    "problem": {"kind": "gaussian_shift", "n_src": 40, "n_tgt": 30,
                "mu": [1.0, 0.5], "shift": [0.5, 0.0], "flip_prob": 0.1},
    "algorithms": [{"name": "gap_boost"}, {"name": "adaboost_t"}],
    "target_fractions": [0.3],
    "seeds": [1, 2],
    "rounds": 4
}"#;

fn gapmin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapmin")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_records_aggregates_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = gapmin(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 4);
    assert!(out.join("aggregate.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_records"], 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("gap_boost"));
}

#[test]
fn sweep_emits_one_record_per_grid_value_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("sweep");
    let o = gapmin(&[
        "sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--axis", "rho-s", "--grid", "-0.1,-0.7,-2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().filter(|l| l.starts_with("gap_boost,")).count(), 6);
}

#[test]
fn generate_writes_both_domains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("data");
    let o = gapmin(&["generate", "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let target = std::fs::read_to_string(out.join("target.csv")).unwrap();
    assert_eq!(target.lines().next(), Some("x0,x1,y"));
    assert_eq!(target.lines().count(), 31);
    assert_eq!(std::fs::read_to_string(out.join("source.csv")).unwrap().lines().count(), 41);
}

#[test]
fn gap_prints_a_nonnegative_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = gapmin(&["gap", "--config", &cfg, "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["nabla"].as_f64().unwrap() >= -1e-6);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CONFIG.replace("\"seeds\": [1, 2]", "\"seeds\": []");
    let cfg = write_config(dir.path(), &bad);
    let o = gapmin(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seeds"));

    let o = gapmin(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(dir.path(), "{ not json");
    assert_eq!(gapmin(&["run", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn verify_certified_bounds_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapmin(&["verify", "--trials", "20", "--certified", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 5);
}

#[test]
fn verify_reports_stated_bound_violations_with_code_3() {
    // Seed 0 contains parameter-sharing counterexamples to the stated bound.
    let o = gapmin(&["verify", "--trials", "100", "--seed", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parameter_sharing"));
}
