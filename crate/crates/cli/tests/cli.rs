use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kgamma(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgamma"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn kgamma")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad stdout ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("bad stderr ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn kgamma_of_spike_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("1\n");
    for _ in 0..1000 {
        body.push_str("0.001\n");
    }
    fs::write(dir.path().join("spike.txt"), body).unwrap();
    let out = kgamma(&["kgamma", "--spectrum", "spike.txt", "--gamma", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["k_gamma"], 1);
    assert_eq!(v["d"], 1001);
    assert_eq!(v["min_bound_check"], true);
}

#[test]
fn kgamma_of_zero_spectrum_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("zero.json"), "[0, 0, 0]").unwrap();
    let out = kgamma(&["kgamma", "--spectrum", "zero.json", "--gamma", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["k_gamma"], 0);
}

#[test]
fn kgamma_of_twin_spec() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.json"), r#"{"twin": "P", "d": 9}"#).unwrap();
    let out = kgamma(&["kgamma", "--spec", "p.json", "--gamma", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["k_gamma"], 3);
}

#[test]
fn kgamma_needs_exactly_one_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgamma(&["kgamma", "--gamma", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shatter_scaled_identity() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.txt"), "2 0 0\n0 2 0\n0 0 2\n").unwrap();
    let out = kgamma(&["shatter", "--matrix", "x.txt", "--gamma", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["shattered"], true);
    assert!((v["gamma_star"].as_f64().unwrap() - 2.0 / 3f64.sqrt()).abs() < 1e-9);
    assert!((v["lambda_min"].as_f64().unwrap() - 4.0).abs() < 1e-9);
}

#[test]
fn shatter_duplicate_rows_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.txt"), "1 0\n1 0\n").unwrap();
    let out = kgamma(&["shatter", "--matrix", "x.txt", "--gamma", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["shattered"], false);
}

#[test]
fn malformed_matrix_exits_two_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.txt"), "1 0\n1 oops\n").unwrap();
    let out = kgamma(&["shatter", "--matrix", "x.txt", "--gamma", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "parse");
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgamma(&["kgamma", "--spectrum", "nope.txt", "--gamma", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"experiment": "bogus"}"#).unwrap();
    let out = kgamma(&["experiment", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("bogus"));
}

#[test]
fn mem_fit_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.txt"), "1 0 1\n0 1 -1\n-1 0 -1\n").unwrap();
    let out = kgamma(
        &["mem", "fit", "--data", "d.txt", "--gamma", "0.5", "--algorithm", "exact"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["margin_error"], 0.0);
    assert_eq!(v["certificate"], "enumerated");
}

#[test]
fn bounds_compare_reports_kgamma() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.txt"), "1\n0.5\n0.25\n").unwrap();
    let out = kgamma(
        &[
            "bounds",
            "compare",
            "--spectrum",
            "s.txt",
            "--gamma",
            "0.5",
            "--epsilon",
            "0.1",
            "--delta",
            "0.05",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["k_gamma"], 2);
    assert!(v["kgamma_bound"]["value"].as_f64().unwrap() <= 0.1);
}

#[test]
fn experiment_replays_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"experiment": "shatter-prob", "distribution": {"twin": "D", "d": 6}, "m_grid": [2, 4], "gamma_grid": [0.5, 1], "trials": 30}"#,
    )
    .unwrap();
    let first = kgamma(
        &["--seed", "7", "--threads", "1", "--out-dir", "a", "experiment", "c.json"],
        dir.path(),
    );
    let second = kgamma(
        &["--seed", "7", "--threads", "3", "--out-dir", "b", "experiment", "c.json"],
        dir.path(),
    );
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(second.status.code(), Some(0));
    for file in ["shatter-prob.csv", "shatter-prob.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let summary: Value = serde_json::from_slice(&fs::read(dir.path().join("a/shatter-prob.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["schema"], "1");
}
