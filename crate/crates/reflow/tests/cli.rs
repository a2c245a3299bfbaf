use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn reflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reflow")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const FLOW: &str = r#"{
  "experiment": "flow",
  "domain": {"kind": "half_space", "dim": 2},
  "coefficients": {"preset": "frozen"},
  "grid": {"t_end": 1.0, "n_steps": 10},
  "initial_points": {"kind": "explicit", "points": [[0.0, 1.0], [2.5, 0.0]]},
  "seed": 7
}"#;

const ORACLE: &str = r#"{
  "experiment": "oracle1d",
  "domain": {"kind": "half_space", "dim": 1},
  "coefficients": {"preset": "bm"},
  "grid": {"t_end": 1.0, "n_steps": 2000},
  "initial_points": {"kind": "explicit", "points": [[0.0], [0.1], [1.0], [5.0]]},
  "seed": 42
}"#;

#[test]
fn frozen_flow_keeps_every_particle_in_place() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flow.json", FLOW);
    let out = dir.path().join("out");
    let res = reflow(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert!(manifest["config"].get("output_dir").is_none());

    let mut rdr = csv::Reader::from_path(out.join("trajectories.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2 * 11);
    for r in &rows {
        let start = if &r[0] == "0" { [0.0, 1.0] } else { [2.5, 0.0] };
        assert_eq!(r[3].parse::<f64>().unwrap(), start[0]);
        assert_eq!(r[4].parse::<f64>().unwrap(), start[1]);
        assert_eq!(r[5].parse::<f64>().unwrap(), 0.0);
    }
    let taus = std::fs::read_to_string(out.join("hitting_times.csv")).unwrap();
    assert!(taus.contains("0,NEVER,NEVER"));
    assert!(taus.contains("1,0,0.0000000000000000e0"));

    // Listed digests match the files on disk.
    for f in manifest["files"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], reflow::output::sha256_hex(&bytes));
    }
}

#[test]
fn oracle_experiment_matches_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "oracle.json", ORACLE);
    let res = reflow(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(res.status.success());
    let manifest: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(manifest["summary"]["max_abs_error"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn seed_override_and_thread_count_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "oracle.json", ORACLE);
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let res = reflow(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "9", "--threads", threads]);
        assert!(res.status.success());
        res.stdout
    };
    let a = run("a", "1");
    let b = run("b", "4");
    assert_eq!(a, b);
    let m: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["seed"], 9);
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "bad.json", &FLOW.replace("\"seed\": 7", "\"seed\": 7, \"sed\": 1"));
    let res = reflow(&["run", &unknown]);
    assert_eq!(res.status.code(), Some(2));
    assert!(res.stdout.is_empty());

    let oracle_disk = write_config(dir.path(), "o.json", &ORACLE.replace(r#"{"kind": "half_space", "dim": 1}"#, r#"{"kind": "unit_disk"}"#));
    assert_eq!(reflow(&["validate", &oracle_disk]).status.code(), Some(2));
    assert_eq!(reflow(&["run", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn start_outside_domain_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "out.json", &FLOW.replace("[2.5, 0.0]", "[2.5, -0.5]"));
    let res = reflow(&["run", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(res.stdout.is_empty());
}

#[test]
fn presets_and_validate() {
    let res = reflow(&["presets"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    for name in ["frozen", "bm", "linear-drift", "example2"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flow.json", FLOW);
    assert!(reflow(&["validate", &cfg]).status.success());
}
