use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FIG1: &str = r#"{"variables": 2, "bits": 2,
  "objective": {"constant": 0, "coefficients": [-2, -1]},
  "constraints": [{"coefficients": [1, 1], "constant": 0, "sense": "ge"}]}"#;

const FIG9: &str = r#"{"variables": 2, "bits": 2,
  "objective": {"constant": 0, "coefficients": [-2, -2]},
  "constraints": [{"coefficients": [-1, 1], "constant": 0, "sense": "ge"}]}"#;

const TINY: &str = r#"{"variables": 1, "bits": 2,
  "objective": {"constant": 0, "coefficients": [1]},
  "constraints": [{"coefficients": [1], "constant": 1, "sense": "ge"}]}"#;

const INFEASIBLE: &str = r#"{"variables": 1, "bits": 2,
  "objective": {"coefficients": [1]},
  "constraints": [{"coefficients": [1], "constant": 0, "sense": "ge"},
                  {"coefficients": [-1], "constant": -1, "sense": "ge"}]}"#;

const FREE: &str = r#"{"variables": 2, "bits": 2, "objective": {"coefficients": [1, -1]}}"#;

/// Fresh scratch directory for one test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qmh-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn instance(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn qmh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmh"))
        .args(args)
        .env_remove("QMH_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn top_row(dir: &Path) -> Vec<String> {
    let text = fs::read_to_string(dir.join("marginal.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("x1,x2,probability,feasible,f_value"));
    lines.next().unwrap().split(',').map(String::from).collect()
}

#[test]
fn solve_fig1() {
    let dir = scratch("solve1");
    let file = instance(&dir, "fig1.json", FIG1);
    let out_dir = dir.join("out");
    let out = qmh(&[
        "solve", &file, "--q", "20", "--t-max", "3", "--mode", "exact", "--seed", "7", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let row = top_row(&out_dir);
    assert_eq!(&row[..2], ["1", "1"]);
    assert_eq!(row[3], "true");
    assert_eq!(row[4], "-3");
    let run: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["instance"]["variables"], 2);
    assert_eq!(run["stages"].as_array().unwrap().len(), 20);
    assert_eq!(run["mode_point"], serde_json::json!([1, 1]));
    assert_eq!(run["qubits"], 24);
}

#[test]
fn solve_fig9_with_bits_override() {
    let dir = scratch("solve9");
    let file = instance(&dir, "fig9.json", FIG9);
    let out = qmh(&["solve", &file, "--bits", "3", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(&top_row(&dir)[..2], ["3", "3"]);
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = scratch("seed");
    let file = instance(&dir, "fig1.json", FIG1);
    let (a, b) = (dir.join("a"), dir.join("b"));
    let flag = qmh(&["solve", &file, "--seed", "11", "--out", a.to_str().unwrap()]);
    assert!(flag.status.success());
    let env = Command::new(env!("CARGO_BIN_EXE_qmh"))
        .args(["solve", &file, "--out", b.to_str().unwrap()])
        .env("QMH_SEED", "11")
        .output()
        .unwrap();
    assert!(env.status.success());
    let load = |p: &PathBuf| -> Value { serde_json::from_str(&fs::read_to_string(p.join("run.json")).unwrap()).unwrap() };
    let (ra, rb) = (load(&a), load(&b));
    assert_eq!(ra["config"]["seed"], 11);
    assert_eq!(ra["stages"], rb["stages"]);
    assert_eq!(ra["final_marginal"], rb["final_marginal"]);
    assert_eq!(
        fs::read_to_string(a.join("marginal.csv")).unwrap(),
        fs::read_to_string(b.join("marginal.csv")).unwrap()
    );
}

#[test]
fn explicit_schedule() {
    let dir = scratch("betas");
    let file = instance(&dir, "fig1.json", FIG1);
    let out = qmh(&["solve", &file, "--betas", "0,0.5,1,2,4,8", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let run: Value = serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["schedule"], serde_json::json!([0.0, 0.5, 1.0, 2.0, 4.0, 8.0]));
    let bad = qmh(&["solve", &file, "--betas", "1,0.5", "--out", dir.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    let infeasible = instance(&dir, "bad.json", INFEASIBLE);
    assert_eq!(qmh(&["solve", &infeasible, "--out", dir.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(qmh(&["oracle", &infeasible]).status.code(), Some(3));
    let broken = instance(&dir, "broken.json", "{\"variables\": 2");
    assert_eq!(qmh(&["estimate", &broken]).status.code(), Some(2));
    let short = instance(&dir, "short.json", r#"{"variables": 2, "bits": 2, "objective": {"coefficients": [1]}}"#);
    let out = qmh(&["oracle", &short]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coefficient count mismatch"));
    let fig1 = instance(&dir, "fig1.json", FIG1);
    assert_eq!(qmh(&["verify", &fig1]).status.code(), Some(4));
    assert_eq!(qmh(&["estimate", "/nonexistent/file.json"]).status.code(), Some(1));
    assert_eq!(qmh(&["solve", &fig1, "--bogus"]).status.code(), Some(1));
    assert_eq!(qmh(&["--help"]).status.code(), Some(0));
}

#[test]
fn estimate_reports() {
    let dir = scratch("estimate");
    let fig1 = instance(&dir, "fig1.json", FIG1);
    let linear = json(&qmh(&["estimate", &fig1, "--beta", "1", "--mode", "linear"]));
    assert_eq!(linear["qubits"], 24);
    let widths: u64 = linear["registers"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(widths, 24);
    let parts: f64 = linear["breakdown"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_f64().unwrap())
        .sum();
    let total = linear["toffoli_equivalents"].as_f64().unwrap();
    assert!((parts - total).abs() < 1e-9);
    let exact = json(&qmh(&["estimate", &fig1, "--beta", "1", "--mode", "exact"]));
    assert!(exact["breakdown"]["B"].as_f64().unwrap() > linear["breakdown"]["B"].as_f64().unwrap());
}

#[test]
fn estimate_without_constraints() {
    let dir = scratch("estimate0");
    let free = instance(&dir, "free.json", FREE);
    let dump = dir.join("w.txt");
    let report = json(&qmh(&["estimate", &free, "--dump", dump.to_str().unwrap()]));
    assert_eq!(report["registers"]["R"], 0);
    let coin = 4 + 4 + 2 * report["registers"]["F"].as_u64().unwrap();
    let text = fs::read_to_string(dump).unwrap();
    let swaps: Vec<&str> = text.lines().filter(|l| l.starts_with("CSWAP")).collect();
    assert!(!swaps.is_empty());
    for line in swaps {
        assert!(line.ends_with(&format!("[{coin}+]")), "{line}");
    }
}

#[test]
fn sweep_writes_tables() {
    let dir = scratch("sweep");
    let out = qmh(&[
        "sweep", "--vars", "2", "--bits-range", "2..3", "--constraints-range", "1..2", "--instances", "3",
        "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 3);
    assert!(rows.starts_with("n,d,m_prime,coeff_bound,k,toffoli_equivalents,seed"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["groups"].as_array().unwrap().len(), 2);
    let csv = fs::read_to_string(dir.join("sweep_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 + 1);
}

#[test]
fn verify_tiny() {
    let dir = scratch("verify");
    let tiny = instance(&dir, "tiny.json", TINY);
    let exact = json(&qmh(&["verify", &tiny, "--beta", "1", "--mode", "exact"]));
    assert_eq!(exact["passed"], true);
    assert!(exact["unitarity_residual"].as_f64().unwrap() <= 1e-10);
    let linear = json(&qmh(&["verify", &tiny, "--mode", "linear"]));
    assert_eq!(linear["passed"], true);
    let checks = linear["checks"].as_array().unwrap();
    let eig = checks.iter().find(|c| c["name"] == "eigenstate_residual").unwrap();
    assert!(eig["passed"].is_null());
}

#[test]
fn oracle_fig1() {
    let dir = scratch("oracle");
    let fig1 = instance(&dir, "fig1.json", FIG1);
    let hot = json(&qmh(&["oracle", &fig1, "--beta", "0"]));
    assert_eq!(hot["feasible_count"], 6);
    assert_eq!(hot["search_space"], 16);
    for row in hot["gibbs"].as_array().unwrap() {
        assert!((row["probability"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }
    let cold = json(&qmh(&["oracle", &fig1, "--beta", "50"]));
    assert_eq!(cold["argmin"], serde_json::json!([[1, 1]]));
    assert_eq!(cold["optimum"], -3);
}
