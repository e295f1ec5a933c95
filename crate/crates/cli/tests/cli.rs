use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nemsq(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nemsq"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NEMSQ_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn record(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("record.json")).unwrap()).unwrap()
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    record(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["name"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn spectrum_writes_csv_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nemsq(&["spectrum", "--out", "s", "--n-points", "257", "--set", "scan.points=5"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("s");
    let text = fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "scan_value,E0,E1,E2,E3,E4,E5,flags");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.split(',').count() == 8));
    let rec = record(&dir);
    assert_eq!(rec["verb"], "spectrum");
    assert_eq!(rec["config"]["numerics"]["n_points"], 257);
    for (name, sha) in digests(&dir) {
        let bytes = fs::read(dir.join(&name)).unwrap();
        let expect = rec["files"].as_array().unwrap().iter().find(|f| f["name"] == name.as_str()).unwrap();
        assert_eq!(expect["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(sha.len(), 64);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = nemsq(&["wavefunctions", "--out", out, "--n-points", "257", "--set", "physics.a=2"], tmp.path());
        assert_eq!(code(&o), 0);
    }
    let (a, b) = (digests(&tmp.path().join("a")), digests(&tmp.path().join("b")));
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
}

#[test]
fn json_format_parses() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nemsq(&["feasibility", "--out", "f", "--format", "json"], tmp.path());
    assert_eq!(code(&o), 0);
    let rows: Value = serde_json::from_slice(&fs::read(tmp.path().join("f/feasibility.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows[0].get("candidate").unwrap().is_boolean());
}

#[test]
fn config_errors_exit_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["spectrum", "--out", "bad", "--set", "physics.a=-1"],
        vec!["spectrum", "--out", "bad", "--set", "physics.nope=1"],
        vec!["spectrum", "--out", "bad", "--set", "noequals"],
        vec!["mechanics", "--out", "bad", "--set", "physics.plate.y0=2"],
    ] {
        let o = nemsq(&args, tmp.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!tmp.path().join("bad").exists());
    }
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(code(&nemsq(&["spectrum", "--config", cfg.to_str().unwrap()], tmp.path())), 2);
    assert_eq!(code(&nemsq(&["--out", "x"], tmp.path())), 2);
}

#[test]
fn runtime_errors_exit_3_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nemsq(
        &["two-qubit", "--out", "big", "--set", "two_qubit.verify_2d=true", "--set", "two_qubit.verify_points=1024"],
        tmp.path(),
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!tmp.path().join("big").exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0, "no staging leftovers");
}

#[test]
fn output_root_applies_to_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_nemsq"))
        .args(["feasibility"])
        .current_dir(tmp.path())
        .env("NEMSQ_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(root.join("runs/feasibility/feasibility.csv").exists());
}

#[test]
fn sweep_indexes_every_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nemsq(
        &[
            "sweep", "--out", "sw", "--sweep-verb", "wavefunctions", "--axis", "physics.a", "--values", "1,2,-1",
            "--n-points", "129", "--parallel", "2",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("sw");
    let index = fs::read_to_string(dir.join("index.csv")).unwrap();
    let lines: Vec<&str> = index.lines().collect();
    assert_eq!(lines[0], "index,value,status,exit_code,output_dir,error");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,1,ok,0,run_000,"));
    assert!(lines[2].starts_with("1,2,ok,0,run_001,"));
    assert!(lines[3].starts_with("2,-1,failed,2,,"));
    assert!(dir.join("run_000/levels.csv").exists());
    assert!(!dir.join("run_002").exists());
    let a1: Value = record(&dir.join("run_001"));
    assert_eq!(a1["config"]["physics"]["a"], 2.0);
}

#[test]
fn sweep_rejects_bad_axis_and_empty_values() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_axis = ["sweep", "--out", "sw", "--sweep-verb", "feasibility", "--axis", "physics.zz", "--values", "1"];
    assert_eq!(code(&nemsq(&bad_axis, tmp.path())), 2);
    let no_values = ["sweep", "--out", "sw", "--sweep-verb", "feasibility", "--axis", "physics.a"];
    assert_eq!(code(&nemsq(&no_values, tmp.path())), 2);
    assert!(!tmp.path().join("sw").exists());
}
