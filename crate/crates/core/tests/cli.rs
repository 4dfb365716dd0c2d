//! End-to-end tests of the `levdun` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn survival() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/survival.csv")
}

fn litter() -> Option<PathBuf> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/litter.csv");
    path.exists().then_some(path)
}

fn levdun(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levdun"))
        .args(args)
        .env_remove("LEVDUN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn survival_args<'a>(data: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec!["--data", data, "--response", "survival", "--group", "site"];
    args.extend_from_slice(extra);
    args
}

fn json_rows(out: &Output) -> Vec<serde_json::Value> {
    let v: serde_json::Value = serde_json::from_str(&stdout(out)).expect("valid JSON");
    v["rows"].as_array().unwrap().clone()
}

#[test]
fn export_ci_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = survival();
    let data = data.to_str().unwrap();
    let mut contents = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let path = path.to_str().unwrap().to_owned();
        let mut args = vec!["export-ci"];
        args.extend(survival_args(data, &["--seed", "7", "--out", &path]));
        let out = levdun(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        contents.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(contents[0], contents[1]);
}

#[test]
fn export_ci_one_sided_has_infinite_upper_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ci.csv");
    let path = path.to_str().unwrap();
    let data = survival();
    let mut args = vec!["export-ci"];
    args.extend(survival_args(data.to_str().unwrap(), &["--out", path]));
    assert!(levdun(&args).status.success());
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("label,estimate,lower,upper"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[3], "inf");
        let lower: f64 = cells[2].parse().unwrap();
        let est: f64 = cells[1].parse().unwrap();
        assert!(lower < est);
    }
}

#[test]
fn export_ci_two_sided_bounds_are_finite_and_bracket_the_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ci.csv");
    let path = path.to_str().unwrap();
    let data = survival();
    let mut args = vec!["export-ci"];
    args.extend(survival_args(data.to_str().unwrap(), &["--alternative", "two-sided", "--out", path]));
    assert!(levdun(&args).status.success());
    let text = std::fs::read_to_string(path).unwrap();
    for row in text.lines().skip(1) {
        let v: Vec<f64> = row.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert!(v.iter().all(|x| x.is_finite()));
        assert!(v[1] < v[0] && v[0] < v[2]);
    }
}

#[test]
fn export_ci_requires_out() {
    let data = survival();
    let mut args = vec!["export-ci"];
    args.extend(survival_args(data.to_str().unwrap(), &[]));
    assert_eq!(levdun(&args).status.code(), Some(2));
}

#[test]
fn unknown_control_label_is_a_validation_error() {
    let data = survival();
    let mut args = vec!["test"];
    args.extend(survival_args(data.to_str().unwrap(), &["--control", "999"]));
    let out = levdun(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown control label"));
}

#[test]
fn missing_file_and_bad_flags_exit_2() {
    assert_eq!(levdun(&["test", "--data", "/nonexistent/x.csv"]).status.code(), Some(2));
    assert_eq!(levdun(&["test"]).status.code(), Some(2));
    let data = survival();
    let mut args = vec!["test"];
    args.extend(survival_args(data.to_str().unwrap(), &["--alpha", "1.5"]));
    assert_eq!(levdun(&args).status.code(), Some(2));
}

#[test]
fn json_report_agrees_with_table() {
    let data = survival();
    let data = data.to_str().unwrap();
    let extra = ["--contrast", "grandmean", "--alternative", "two-sided", "--seed", "11"];
    let mut args = vec!["test"];
    args.extend(survival_args(data, &extra));
    let mut json_args = args.clone();
    json_args.extend(["--format", "json"]);

    let table = stdout(&levdun(&args));
    let rows = json_rows(&levdun(&json_args));
    assert_eq!(rows.len(), 5);
    for row in &rows {
        let label = row["label"].as_str().unwrap();
        let line = table.lines().find(|l| l.starts_with(label)).expect("table row");
        let cells: Vec<f64> = line[label.len()..]
            .split_whitespace()
            .map(|c| c.parse().unwrap())
            .collect();
        let fields = ["estimate", "stderr", "tstat", "adj_p", "ci_low", "ci_high"];
        for (cell, field) in cells.iter().zip(fields) {
            let full = row[field].as_f64().unwrap();
            assert!((cell - full).abs() <= 5e-4 * full.abs().max(1e-3), "{label} {field}: {cell} vs {full}");
        }
    }
}

#[test]
fn survival_modified_breast_is_significant() {
    let data = survival();
    let mut args = vec!["test"];
    args.extend(survival_args(
        data.to_str().unwrap(),
        &["--contrast", "grandmean", "--alternative", "two-sided", "--modified", "--format", "json"],
    ));
    let rows = json_rows(&levdun(&args));
    let breast = rows.iter().find(|r| r["label"] == "breast - mean").unwrap();
    let p = breast["adj_p"].as_f64().unwrap();
    assert!((p - 0.002).abs() <= 0.005, "breast adj_p {p}");
}

#[test]
fn seed_falls_back_to_environment() {
    let data = survival();
    let data = data.to_str().unwrap();
    let base = survival_args(data, &["--format", "json", "--budget", "5000"]);
    let mut flag = vec!["test"];
    flag.extend(&base);
    flag.extend(["--seed", "99"]);
    let mut env = vec!["test"];
    env.extend(&base);
    let with_env = Command::new(env!("CARGO_BIN_EXE_levdun"))
        .args(&env)
        .env("LEVDUN_SEED", "99")
        .output()
        .unwrap();
    assert!(with_env.status.success());
    assert_eq!(stdout(&levdun(&flag)), stdout(&with_env));
}

fn simulate_rate(extra: &[&str]) -> f64 {
    let mut args = vec!["simulate", "--reps", "4000", "--seed", "3"];
    args.extend_from_slice(extra);
    let out = levdun(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "global").unwrap();
    lines.next().unwrap().split(',').nth(col).unwrap().parse().unwrap()
}

#[test]
fn simulate_null_rate_is_near_nominal() {
    let rate = simulate_rate(&["--n", "10,10,10,10"]);
    assert!((0.03..=0.06).contains(&rate), "rate {rate}");
}

#[test]
fn simulate_modified_small_groups_keeps_level() {
    let rate = simulate_rate(&["--n", "3,3,3,3", "--modified"]);
    assert!((0.025..=0.065).contains(&rate), "rate {rate}");
}

#[test]
fn simulate_rejects_zero_replications() {
    let out = levdun(&["simulate", "--n", "10,10,10,10", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn litter_examples() {
    let Some(path) = litter() else {
        eprintln!("data/litter.csv not present; skipping");
        return;
    };
    let path = path.to_str().unwrap();
    let args = ["test", "--data", path, "--response", "weight", "--group", "dose", "--control", "0", "--format", "json"];
    let rows = json_rows(&levdun(&args));
    let expected = [0.022, 0.491, 0.022];
    for (row, p) in rows.iter().zip(expected) {
        assert!((row["adj_p"].as_f64().unwrap() - p).abs() <= 0.005);
    }
}
