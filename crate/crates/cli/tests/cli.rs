use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn maxgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxgrad")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const ABC_TREE: &str = r#"{"delta": 8, "children": [{"leaf": "c"}, {"delta": 2, "children": [{"leaf": "a"}, {"leaf": "b"}]}]}"#;

#[test]
fn gen_diamond_has_twelve_points() {
    let v = stdout_json(&maxgrad(&["gen", "--family", "diamond", "--k", "2"]));
    assert_eq!(v["labels"].as_array().unwrap().len(), 12);
    assert_eq!(v["dist"].as_array().unwrap().len(), 12);
}

#[test]
fn embed_is_byte_identical_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.json");
    let t = dir.path().join("t.json");
    fs::write(&m, maxgrad(&["gen", "--family", "cycle", "--n", "20"]).stdout).unwrap();
    let args = ["embed", "--in", path_str(&m), "--samples", "100", "--seed", "7"];
    let a = maxgrad(&args);
    let b = maxgrad(&[&args[..], &["--threads", "1", "--tree-out", path_str(&t)]].concat());
    assert_eq!(a.stdout, b.stdout);
    let report = stdout_json(&a);
    assert_eq!(report["samples"], 100);
    assert!(report["max_point_mean"].as_f64().unwrap() >= 1.0);
    // The written tree is a valid cluster input.
    let sol = stdout_json(&maxgrad(&["cluster", "--objective", "ft_kmedian", "--k", "2", "--ultrametric", path_str(&t)]));
    assert_eq!(sol["centers"].as_array().unwrap().len(), 2);
}

#[test]
fn cluster_with_profile_file() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.json");
    let j = dir.path().join("j.json");
    fs::write(&t, ABC_TREE).unwrap();
    fs::write(&j, r#"{"a": 2, "b": 2, "c": 2}"#).unwrap();
    let args = ["cluster", "--objective", "ft_kmedian", "--k", "2", "--profile", path_str(&j), "--ultrametric", path_str(&t)];
    let sol = stdout_json(&maxgrad(&args));
    assert_eq!(sol["value"], 12.0);
    assert_eq!(sol["objective"], "ft_kmedian");

    let sol = stdout_json(&maxgrad(&["cluster", "--objective", "sigma_lp", "--k", "2", "--p", "2", "--ultrametric", path_str(&t)]));
    assert_eq!(sol["value"], 2.0);
    assert_eq!(sol["clusters"].as_array().unwrap().len(), 2);

    let sol = stdout_json(&maxgrad(&["oracle", "--objective", "sigma_lp", "--k", "2", "--p", "inf", "--ultrametric", path_str(&t)]));
    assert_eq!(sol["value"], 2.0);
}

#[test]
fn reduce_is_sound_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.json");
    fs::write(&m, maxgrad(&["gen", "--family", "random", "--n", "7", "--seed", "2"]).stdout).unwrap();
    let args = ["reduce", "--in", path_str(&m), "--objective", "ft_kmedian", "--k", "2", "--seed", "5"];
    let a = maxgrad(&args);
    assert_eq!(a.stdout, maxgrad(&args).stdout);
    let sol = stdout_json(&a);
    let opt = stdout_json(&maxgrad(&["oracle", "--in", path_str(&m), "--objective", "ft_kmedian", "--k", "2"]));
    assert!(sol["value"].as_f64().unwrap() >= opt["value"].as_f64().unwrap());
    assert_eq!(sol["reduction"]["per_sample"].as_array().unwrap().len(), 16);
}

#[test]
fn bench_writes_csv_with_header() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("g.csv");
    let out = maxgrad(&["bench", "--family", "cycle", "--sizes", "8,16", "--samples", "10", "--seed", "1", "--out", path_str(&csv)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,mean_max_gradient,max_point_mean,stderr,ln_n,ln_n_sq,edge_weighted_mean"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn karp_single_edge() {
    let v = stdout_json(&maxgrad(&["karp", "--n", "8", "--edge", "3"]));
    assert_eq!(v["deleted_edge"], 3);
    assert_eq!(v["gradients"].as_array().unwrap().len(), 8);
}

fn diagnostic(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn exit_codes() {
    // Usage: missing seed on a randomized command.
    assert_eq!(maxgrad(&["gen", "--family", "random", "--n", "5"]).status.code(), Some(2));
    assert_eq!(maxgrad(&["embed", "--in", "x.json"]).status.code(), Some(2));

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"labels": ["a", "b", "c"], "dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}"#).unwrap();
    let out = maxgrad(&["embed", "--in", path_str(&bad), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(diagnostic(&out)["error"], "triangle_violation");

    let big = dir.path().join("big.json");
    fs::write(&big, maxgrad(&["gen", "--family", "cycle", "--n", "13"]).stdout).unwrap();
    let out = maxgrad(&["oracle", "--in", path_str(&big), "--objective", "ft_kmedian", "--k", "2"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(diagnostic(&out)["error"], "too_large_for_oracle");

    let out = maxgrad(&["karp", "--n", "8", "--edge", "8"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(diagnostic(&out)["error"], "bad_edge");

    let missing = dir.path().join("missing.json");
    let out = maxgrad(&["embed", "--in", path_str(&missing), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(diagnostic(&out)["exit_code"], 1);
}
