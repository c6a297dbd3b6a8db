use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lorentz-gauge"));
    c.env("LORENTZ_GAUGE_LOG", "error");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_connection_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run"], &scenario("minkowski-zero"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["pass"], true);
    let names: Vec<&str> = r["experiments"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|e| e["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()))
        .collect();
    assert!(names.contains(&"transport.identity"));
    assert!(names.contains(&"broken.identity"));
    let csv = std::fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(csv.starts_with("name,value,threshold,pass"));
    assert!(csv.lines().any(|l| l.starts_with("transport.identity,")));
}

#[test]
fn planted_gauge_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reconstruct"], &scenario("planted-round-trip"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    let checks = r["experiments"][0]["checks"].as_array().unwrap();
    let round_trip = checks.iter().find(|c| c["name"] == "reconstruct.round_trip").unwrap();
    assert!(round_trip["value"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn unrelated_connections_fail_the_theorem_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run"], &scenario("inconsistent"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("reconstruct.verify_theorem"));
    let failed: Vec<String> =
        report(dir.path())["failed"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_owned()).collect();
    assert!(failed.contains(&"reconstruct.verify_theorem".to_owned()));
    assert!(!failed.contains(&"broken.distinguishes".to_owned()));
}

#[test]
fn schema_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: Value = serde_json::from_str(&std::fs::read_to_string(scenario("minkowski-zero")).unwrap()).unwrap();
    s["experiments"][1]["s"] = Value::String("long".into());
    let path = dir.path().join("bad.json");
    std::fs::write(&path, s.to_string()).unwrap();
    let o = run(&["run"], &path, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiments[1].s"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_seed_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: Value = serde_json::from_str(&std::fs::read_to_string(scenario("inconsistent")).unwrap()).unwrap();
    s.as_object_mut().unwrap().remove("seed");
    let path = dir.path().join("unseeded.json");
    std::fs::write(&path, s.to_string()).unwrap();
    let o = run(&["run"], &path, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn usage_errors_exit_with_two() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().arg("run").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["interaction"], &scenario("minkowski-zero"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no interaction experiments"));
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let config = scenario("inconsistent");
    let first = run(&["broken", "--seed", "4"], &config, a.path());
    let second = run(&["broken", "--seed", "4", "--threads", "2"], &config, b.path());
    let other = run(&["broken", "--seed", "5"], &config, c.path());
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(first.stdout, second.stdout);
    assert_ne!(first.stdout, other.stdout);
    assert_eq!(report(a.path())["content_hash"], report(b.path())["content_hash"]);
    assert_eq!(report(a.path())["scenario"]["seed"], 4);
}

#[test]
fn broken_writes_queries_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["broken"], &scenario("inconsistent"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let queries = std::fs::read_to_string(dir.path().join("queries.jsonl")).unwrap();
    let results = std::fs::read_to_string(dir.path().join("results.jsonl")).unwrap();
    assert_eq!(queries.lines().count(), 20);
    assert_eq!(results.lines().count(), 20);
    let q: Value = serde_json::from_str(queries.lines().next().unwrap()).unwrap();
    for key in ["y", "v", "w", "s_in", "s_out", "experiment"] {
        assert!(q.get(key).is_some(), "missing {key}");
    }
    let r: Value = serde_json::from_str(results.lines().next().unwrap()).unwrap();
    assert!(r["partner_difference"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_all_uses_the_builtin_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("verify-all").arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["scenario"]["name"], "default");
    assert_eq!(r["experiments"].as_array().unwrap().len(), 5);
    let hash = String::from_utf8(o.stdout).unwrap();
    assert_eq!(hash.trim(), r["content_hash"].as_str().unwrap());
}
