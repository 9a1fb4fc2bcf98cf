use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oosplan"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn solver_available() -> bool {
    Command::new("python3").args(["-c", "import highspy"]).status().map(|s| s.success()).unwrap_or(false)
}

#[test]
fn validate_accepts_bundled_and_rejects_broken() {
    let out = bin().args(["validate", "--scenario"]).arg(scenario("usecase1.json")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok (10 satellites"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x"}"#).unwrap();
    let out = bin().args(["validate", "--scenario"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn export_writes_model_names_and_edges() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["export-mps", "--scenario"])
        .arg(scenario("usecase1.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mps = std::fs::read_to_string(dir.path().join("model.mps")).unwrap();
    assert!(mps.starts_with("NAME") && mps.trim_end().ends_with("ENDATA"));
    let names: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("names.json")).unwrap()).unwrap();
    assert!(names.is_object());
    let edges = std::fs::read_to_string(dir.path().join("edges.tsv")).unwrap();
    assert!(edges.lines().any(|l| l.starts_with("arc\t")));
}

#[test]
fn schedule_writes_reports() {
    if !solver_available() {
        eprintln!("skipped: no MILP backend");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["schedule", "--gap", "0.01", "--scenario"])
        .arg(scenario("usecase1.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["itinerary.csv", "gantt.json", "demand.csv", "edges.tsv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["violations"].as_array().map(Vec::len), Some(0));
    assert!(summary["served"].as_u64().unwrap() > 0);
}

#[test]
fn trade_writes_one_row_per_run() {
    if !solver_available() {
        eprintln!("skipped: no MILP backend");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["trade", "--seeds", "1..2", "--workers", "2", "--scenario"])
        .arg(scenario("trade-monolithic-10.json"))
        .arg("--scenario")
        .arg(scenario("trade-distributed-10.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trade.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    assert!(csv.lines().skip(1).all(|l| l.contains(",ok,")), "{csv}");
    let runs = std::fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().is_dir());
    assert_eq!(runs.filter(|e| e.path().join("seed-2/series.csv").exists()).count(), 2);
}

#[test]
fn bad_seed_range_is_a_usage_error() {
    let out = bin().args(["trade", "--seeds", "x..3", "--scenario", "nope.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
