//! End-to-end checks of the `rae` binary.

use std::path::Path;
use std::process::{Command, Output};

fn rae(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rae"))
        .args(args)
        .env("RAE_OUTPUT_DIR", dir)
        .current_dir(dir)
        .output()
        .expect("spawn rae")
}

const SMALL: [&str; 8] = ["--m", "12", "--k", "4000", "--replications", "2", "--seed", "5"];

#[test]
fn run_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--policy", "ebt"];
    args.extend(SMALL);
    let out = rae(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("policy,M,K,sigma2,epsilon,beta_or_gamma,seed,replication,naee"));
    assert_eq!(lines.len(), 1 + 2 + 2);
    assert!(lines[3].contains(",mean,"));
    assert!(lines[4].contains(",stderr,"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["m"], 12);
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(meta["git_revision"].is_string());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"m": 9, "k": 3000, "replications": 1, "policy": {"kind": "sat", "gamma": 20}}"#,
    )
    .unwrap();
    let out = rae(dir.path(), &["run", "--config", cfg.to_str().unwrap(), "--k", "2000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..3], &["sat", "9", "2000"]);
    assert_eq!(row[5].parse::<f64>().unwrap(), 20.0);
}

#[test]
fn single_thread_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let mut args = vec!["--threads", "1", "sweep", "--preset", "sigma2", "--values", "1,2", "--out", name];
        args.extend(SMALL);
        let out = rae(dir.path(), &args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        texts.push(std::fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let header = String::from_utf8(texts[0].clone()).unwrap();
    assert!(header.lines().next().unwrap().ends_with("ref_oblivious_floor"));
    // 2 values x 6 policies x (2 replications + mean + stderr)
    assert_eq!(header.lines().count(), 1 + 2 * 6 * 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = rae(dir.path(), &["run", "--epsilon", "1.0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("epsilon"));
    let unknown = rae(dir.path(), &["run", "--policy", "tdma"]);
    assert_eq!(unknown.status.code(), Some(1));
    let usage = rae(dir.path(), &["frobnicate"]);
    assert_eq!(usage.status.code(), Some(1));
    let cap = rae(dir.path(), &["oracle", "walk", "--beta", "1e9", "--sigma", "1", "--paths", "10"]);
    assert_eq!(cap.status.code(), Some(2));
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("x.csv");
    let mut args = vec!["run", "--out", target.to_str().unwrap()];
    args.extend(SMALL);
    let io = rae(dir.path(), &args);
    assert_eq!(io.status.code(), Some(3));
}

#[test]
fn oracle_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = rae(dir.path(), &["oracle", "walk", "--beta", "10", "--paths", "2000"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("oracle_walk.csv")).unwrap();
    assert!(csv.starts_with("kind,level,sigma,dt,n_paths,capped,e_j"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn calibrate_sat_lists_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = rae(dir.path(), &["calibrate-sat", "--m", "10"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("calibrate_sat.csv")).unwrap();
    assert!(csv.lines().count() > 9);
    assert!(String::from_utf8_lossy(&out.stdout).contains("gamma="));
}
