//! Runs the binary as a user would: exit codes, output files, warnings.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn errstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_errstat")).args(args).output().unwrap()
}

fn json_stdout(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--json", "-"]);
    let out = errstat(&all);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn stats_writes_text_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = (dir.path().join("t.csv"), dir.path().join("r.json"));
    let bench = data("benchmark.csv");
    let out = errstat(&[
        "stats",
        bench.to_str().unwrap(),
        "--boot",
        "200",
        "--csv",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains('A') && text.contains('D'));

    let mut reader = csv::Reader::from_path(&csv).unwrap();
    // One row per method and statistic.
    assert_eq!(reader.records().count(), 16);

    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "stats");
    assert_eq!(report["config"]["boot"], 200);
}

#[test]
fn json_to_stdout_suppresses_the_table() {
    let bench = data("benchmark.csv");
    let report = json_stdout(&["compare", bench.to_str().unwrap(), "--pair", "A,B", "--boot", "300"]);
    assert_eq!(report["command"], "compare");
    let p_g = report["result"]["p_g"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p_g));
}

#[test]
fn dropped_rows_warn_on_stderr_and_in_json() {
    let small = data("small.csv");
    let out = errstat(&["compare", small.to_str().unwrap(), "--pair", "A,B", "--boot", "100", "--json", "-"]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("warning: line"), "{stderr}");
    // N = 12 is also below the MUE minimum.
    assert!(stderr.contains("below the recommended minimum"), "{stderr}");
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["warnings"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_input_exits_with_two() {
    let bench = data("benchmark.csv");
    let b = bench.to_str().unwrap();
    for args in [
        vec!["stats", "/nonexistent/table.csv"],
        vec!["compare", b, "--pair", "A,Z"],
        vec!["compare", b, "--pair", "A"],
        vec!["compare", b, "--pair", "A,B", "--stat", "median"],
        vec!["rank", b, "--nprime", "1"],
        vec!["stats", b, "--svg-size", "50", "--svg", "/tmp/never.svg"],
        vec!["frobnicate"],
        vec!["simulate", "gh", "--h", "0.7"],
    ] {
        let out = errstat(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn unwritable_output_is_an_internal_error() {
    let bench = data("benchmark.csv");
    let out = errstat(&["corr", bench.to_str().unwrap(), "--json", "/nonexistent/dir/r.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(errstat(&["--help"]).status.code(), Some(0));
    assert_eq!(errstat(&["--version"]).status.code(), Some(0));
}

#[test]
fn type1_example_run() {
    let report = json_stdout(&["simulate", "type1", "--stat", "q95", "--n", "60", "--reps", "200", "--seed", "1"]);
    let rows = report["result"].as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        assert_eq!(r["n"], 60);
        assert_eq!(r["reps"], 200);
        let alpha = r["alpha"].as_f64().unwrap();
        assert!((0.0..=0.25).contains(&alpha), "{r}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let bench = data("benchmark.csv");
    let args = ["rank", bench.to_str().unwrap(), "--stat", "q95", "--boot", "300", "--seed", "9", "--json", "-"];
    let (a, b) = (errstat(&args), errstat(&args));
    assert_eq!(a.stdout, b.stdout);
    let other = errstat(&["rank", bench.to_str().unwrap(), "--stat", "q95", "--boot", "300", "--seed", "10", "--json", "-"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn figures_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let bench = data("benchmark.csv");
    let b = bench.to_str().unwrap();
    let path = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let runs: [Vec<String>; 5] = [
        vec!["corr".into(), b.into(), "--svg".into(), path("corr.svg")],
        vec!["sip".into(), b.into(), "--svg".into(), path("sip.svg"), "--pair".into(), "A,B".into(), "--ecdf".into(), path("ecdf.svg")],
        vec!["rank".into(), b.into(), "--boot".into(), "100".into(), "--svg".into(), path("rank.svg")],
        vec!["stats".into(), b.into(), "--boot".into(), "100".into(), "--svg".into(), path("abs.svg")],
        vec!["sip".into(), b.into(), "--u-bar".into(), "0.2".into(), "--pair".into(), "C,D".into(), "--ecdf".into(), path("ecdf2.svg")],
    ];
    for args in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = errstat(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["corr.svg", "sip.svg", "ecdf.svg", "rank.svg", "abs.svg", "ecdf2.svg"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
