use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mitigator"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn error_json(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn tomography_of_ideal_povm() {
    let dir = tempfile::tempdir().unwrap();
    let povm = dir.path().join("povm.json");
    let ideal = mitigator_povm_json();
    std::fs::write(&povm, ideal).unwrap();
    let out_path = dir.path().join("t.json");
    let out = run(&[
        "tomography", "--povm", povm.to_str().unwrap(), "--scheme", "pauli6",
        "--shots", "1000000", "--seed", "4", "--out", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_path);
    assert_eq!(report["report"], "tomography");
    assert!(report["max_distance"].as_f64().unwrap() <= 5e-3);
    assert!(run(&["--check", out_path.to_str().unwrap()]).status.success());
}

fn mitigator_povm_json() -> String {
    serde_json::to_string(&mitigator_core::tomography::Povm::computational(2)).unwrap()
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["tomography", "--povm", "/nonexistent/povm.json", "--out", dir.path().join("x.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "io");
}

#[test]
fn malformed_json_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"elements\": [").unwrap();
    let out = run(&["tomography", "--povm", bad.to_str().unwrap(), "--out", dir.path().join("x.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"], "parse");
}

#[test]
fn decompose_sydney_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("d.json");
    let out = run(&[
        "decompose", "--element", fixture("sydney_pi00.json").to_str().unwrap(),
        "--outcome", "00", "--seed", "0", "--out", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("crosstalk true"));
    let report = read_json(&out_path);
    assert!(report["search"]["epsilon"].as_f64().unwrap() <= 0.0790);
    assert!(run(&["--check", out_path.to_str().unwrap()]).status.success());
}

#[test]
fn decompose_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.json"), dir.path().join("b.json")];
    for p in &paths {
        let out = run(&[
            "decompose", "--element", fixture("rigetti_pi00.json").to_str().unwrap(),
            "--seed", "9", "--out", p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let a = read_json(&paths[0]);
    assert_eq!(a, read_json(&paths[1]));
    assert!(a["search"]["objective"].as_f64().unwrap() <= 0.1183);
}

#[test]
fn certify_ideal_phi_plus() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.json");
    let out = run(&["certify", "--state", "phi_plus", "--p", "0", "--reps", "3", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_path);
    let row = &report["rows"][0];
    assert!(row["p_e"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(row["verdict_raw"]["verdict"], "entangled_below");
    assert_eq!(report["run"]["repetitions"], 3);
    let csv = std::fs::read_to_string(out_path.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);
    assert!(out_path.with_extension("plot.json").exists());
}

#[test]
fn certify_sydney_mitigated_is_more_decisive() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.json");
    let out = run(&[
        "certify", "--state", "psi_minus", "--p", "0.375", "--detector", fixture("sydney_pi00.json").to_str().unwrap(),
        "--mitigate", "--seed", "2", "--out", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let row = &read_json(&out_path)["rows"][0];
    let p_e = row["p_e"].as_f64().unwrap();
    let p0 = row["p0_eta"].as_f64().unwrap();
    assert!(p0 > p_e / 0.9452);
    assert!(row["verdict_mitigated"]["margin"].as_f64().unwrap() >= row["verdict_raw"]["margin"].as_f64().unwrap());
}

#[test]
fn certify_rejects_invalid_p() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["certify", "--state", "psi_minus", "--p", "1.5", "--out", dir.path().join("c.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(error_json(&out)["error"], "numerical");
}

#[test]
fn reproduce_unknown_target_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reproduce", "--what", "appendix3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"], "usage");
}

#[test]
fn reproduce_tables_writes_checked_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reproduce", "--what", "tables", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("tables.json");
    let report = read_json(&path);
    let ids: Vec<&str> = report["experiments"][0]["rows"].as_array().unwrap().iter().map(|r| r["state_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["phi_plus(0.375)", "phi_plus(0.5)", "psi_minus(0.5)", "psi_minus(0.375)"]);
    assert_eq!(report["experiments"][0]["run"]["shots"], 8192);
    assert!(run(&["--check", path.to_str().unwrap()]).status.success());
}

#[test]
fn reproduce_missing_fixture_dir_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["reproduce", "--what", "appendix1", "--out", dir.path().to_str().unwrap()])
        .env("MITIGATOR_FIXTURES", dir.path().join("nowhere"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "io");
}

#[test]
fn check_rejects_tampered_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.json");
    assert!(run(&["certify", "--state", "psi_minus", "--p", "0.2", "--reps", "2", "--out", out_path.to_str().unwrap()]).status.success());
    let mut v = read_json(&out_path);
    v["rows"][0]["p_e"] = Value::from(0.25);
    std::fs::write(&out_path, v.to_string()).unwrap();
    let out = run(&["--check", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let out = run(&["--frobnicate"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"], "usage");
}
