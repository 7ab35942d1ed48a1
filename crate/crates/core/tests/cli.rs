use std::fs;
use std::process::{Command, Output};

fn nfbeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfbeam"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

#[test]
fn missing_config_exits_2_and_names_the_file() {
    let out = nfbeam(&["--config", "/no/such/run.conf", "solve"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/no/such/run.conf"), "{err}");
}

#[test]
fn solve_is_repeatable() {
    let a = nfbeam(&["--seed", "7", "solve"]);
    let b = nfbeam(&["--seed", "7", "solve"]);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    assert!(header.contains(&"objective"));
}

#[test]
fn edof_writes_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edof.csv");
    let out = nfbeam(&["--out", path.to_str().unwrap(), "edof", "--from", "2", "--to", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distance_m,edof_near,edof_far,dof_analytic"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn sweep_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("beta.csv");
    let out = nfbeam(&[
        "--out",
        path.to_str().unwrap(),
        "--trials",
        "2",
        "sweep",
        "--axis",
        "beta",
        "--values",
        "0.3,0.7",
    ]);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    let results = fs::read_to_string(&path).unwrap();
    assert_eq!(results.lines().count(), 1 + 4);
    let summary = fs::read_to_string(dir.path().join("beta_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2);
    assert!(summary.lines().next().unwrap().contains("objective_mean"));
    let conf = fs::read_to_string(dir.path().join("beta_config.txt")).unwrap();
    assert!(conf.contains("trials = 2"));
}

#[test]
fn bad_edof_grid_is_rejected() {
    let out = nfbeam(&["edof", "--from", "5", "--to", "2"]);
    assert_eq!(out.status.code(), Some(2));
}
