//! End-to-end tests of the `truncnet` binary: exit codes, report emission,
//! env overrides and the classify pipeline.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_truncnet"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("truncnet-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn verify_global_passes_and_emits_report() {
    let dir = temp_dir("vg");
    let out = bin()
        .args(["verify-global", "--q", "2", "--l", "2", "--seed", "1"])
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "v1");
    assert_eq!(report["passed"], true);
    assert!(dir.join("global_min_costs.csv").exists());
}

#[test]
fn impossible_tolerance_fails_with_exit_one() {
    let dir = temp_dir("fail");
    let out = bin()
        .args(["verify-global", "--q", "2", "--l", "2", "--seed", "1", "--tol", "1e-30"])
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    // a failure row is present
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"));
}

#[test]
fn verify_local_rejects_mismatched_depth() {
    let out = bin()
        .args(["verify-local", "--q", "2", "--l", "4", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_local_passes_at_square_depth() {
    let out = bin()
        .args(["verify-local", "--q", "2", "--seed", "2", "--mu-samples", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn grad_check_passes() {
    let out = bin()
        .args(["grad-check", "--q", "2", "--l", "2", "--seed", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn gd_baseline_runs_quickly() {
    let out = bin()
        .args(["gd-baseline", "--q", "2", "--l", "2", "--seed", "4"])
        .args(["--inits", "3", "--steps", "300"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn seed_override_env_matches_explicit_seed() {
    let dir = temp_dir("seed");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    let out1 = bin()
        .args(["gen", "--q", "2", "--seed", "1", "--dataset-out", a.to_str().unwrap()])
        .env("SEED_OVERRIDE", "9")
        .output()
        .unwrap();
    assert!(out1.status.success());
    let out2 = bin()
        .args(["gen", "--q", "2", "--seed", "9", "--dataset-out", b.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out2.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn classify_round_trip_from_generated_dataset() {
    let dir = temp_dir("clf");
    let data = dir.join("dataset.json");
    let status = bin()
        .args(["gen", "--q", "2", "--seed", "7", "--dataset-out", data.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    // query the two cluster means themselves
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&data).unwrap()).unwrap();
    let cols = parsed["inputs"].as_array().unwrap();
    let sizes: Vec<usize> = parsed["class_sizes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_usize_lossy())
        .collect();
    let mut queries = String::new();
    let mut start = 0;
    for &n in &sizes {
        let mut mean = [0.0f64; 2];
        for c in &cols[start..start + n] {
            let c = c.as_array().unwrap();
            mean[0] += c[0].as_f64().unwrap();
            mean[1] += c[1].as_f64().unwrap();
        }
        queries.push_str(&format!("{},{}\n", mean[0] / n as f64, mean[1] / n as f64));
        start += n;
    }
    let qpath = dir.join("queries.csv");
    std::fs::write(&qpath, queries).unwrap();
    let results = dir.join("results.csv");
    let out = bin()
        .args(["classify", "--q", "2", "--seed", "7"])
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--inputs", qpath.to_str().unwrap()])
        .args(["--results-out", results.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&results).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "class,distance,tie");
    assert!(lines[1].starts_with("0,"));
    assert!(lines[2].starts_with("1,"));
}

trait LossyUsize {
    fn as_usize_lossy(&self) -> usize;
}

impl LossyUsize for serde_json::Value {
    fn as_usize_lossy(&self) -> usize {
        self.as_u64().unwrap() as usize
    }
}
