//! End-to-end runs of `npqc-lab` through the library entry point.

use std::fs;
use std::path::Path;

use npqc::cli::{run, EXIT_CAPACITY, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE};

fn lab(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["npqc-lab", "--out", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn qfim_writes_identity_with_a_json_header() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lab(dir.path(), &["qfim", "--n", "4", "--p", "2"]), EXIT_OK);
    let text = read(&dir.path().join("qfim.csv"));
    let mut lines = text.lines();
    let head: serde_json::Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(head["command"], "qfim");
    assert_eq!(head["config"]["n"], 4);
    assert_eq!(lines.next().unwrap(), "i,j,value");
    let m = 12;
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (i, j, v): (usize, usize, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap());
        assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, m * m);
    assert!(read(&dir.path().join("qfim_summary.csv")).contains(",true"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(lab(d, &["qfim", "--n", "5", "--p", "1"]), EXIT_USAGE);
    assert_eq!(lab(d, &["qfim", "--n", "4", "--p", "0"]), EXIT_USAGE);
    assert_eq!(lab(d, &["qfim", "--n", "4", "--p", "5"]), EXIT_INFEASIBLE);
    assert_eq!(lab(d, &["qfim", "--n", "26", "--p", "1"]), EXIT_CAPACITY);
    assert_eq!(lab(d, &["qfim", "--threads", "0"]), EXIT_USAGE);
    assert_eq!(
        lab(d, &["sense", "--n", "4", "--p", "2", "--shots", "10..1"]),
        EXIT_USAGE
    );
    assert_eq!(lab(d, &["frobnicate"]), EXIT_USAGE);
    assert_eq!(lab(d, &["--help"]), EXIT_OK);
}

#[test]
fn mismatched_or_broken_configs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(lab(d, &["qfim", "--n", "4", "--p", "1"]), EXIT_OK);
    let qfim_csv = d.join("qfim.csv");
    assert_eq!(lab(d, &["scan", "--config", qfim_csv.to_str().unwrap()]), EXIT_USAGE);
    let bad = d.join("bad.json");
    fs::write(&bad, r#"{"n": 4, "unknown_field": 1}"#).unwrap();
    assert_eq!(lab(d, &["qfim", "--config", bad.to_str().unwrap()]), EXIT_USAGE);
    fs::write(&bad, "not json").unwrap();
    assert_eq!(lab(d, &["qfim", "--config", bad.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn infeasible_superposition_rows_are_not_errors() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "superpose",
        "--n",
        "6",
        "--p",
        "2",
        "--dk",
        "0.9",
        "--targets",
        "2",
        "--grid",
        "5",
    ];
    assert_eq!(lab(dir.path(), &args), EXIT_OK);
    let text = read(&dir.path().join("superpose.csv"));
    let body: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(body.len(), 2 * 25);
    assert!(body.iter().any(|l| l.contains(",false,")));
    assert!(body.iter().any(|l| l.contains(",true,")));
}

#[test]
fn exact_sensing_writes_only_exact_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sense",
        "--n",
        "6",
        "--p",
        "2",
        "--exact",
        "--instances",
        "3",
        "--crao-draws",
        "1",
    ];
    assert_eq!(lab(dir.path(), &args), EXIT_OK);
    let text = read(&dir.path().join("sense.csv"));
    let body: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(body.len(), 3);
    assert!(body.iter().all(|l| l.split(',').nth(4) == Some("-1")));
}

#[test]
fn replaying_an_output_reproduces_it() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "train",
        "--n",
        "4",
        "--p",
        "2",
        "--seeds",
        "2",
        "--max-iters",
        "8",
        "--seed",
        "11",
    ];
    assert_eq!(lab(a.path(), &args), EXIT_OK);
    let first = a.path().join("train.csv");
    let cfg = first.to_str().unwrap();
    assert_eq!(lab(b.path(), &["train", "--config", cfg, "--threads", "1"]), EXIT_OK);
    let body = |s: String| -> String { s.lines().skip(1).collect::<Vec<_>>().join("\n") };
    assert_eq!(body(read(&first)), body(read(&b.path().join("train.csv"))));
}
