use std::path::Path;
use std::process::{Command, Output};

fn kic_lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kic-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("KIC_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn delay_table_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = kic_lab(&["delay-table"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "delay_table.csv");
    assert!(csv.starts_with("i,m,delay_slots\n"));
    assert!(csv.lines().any(|l| l == "4,2,13"));
    assert!(csv.lines().any(|l| l == "3,2,4"));
    assert_eq!(csv.lines().count(), 1 + 8 * 5);
}

#[test]
fn sinr_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"nodes": 6, "alphas": [3.0], "m_list": [0, 1, 2]}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(kic_lab(&["sinr-sweep", "--config", &cfg, "--check"], &a).status.success());
    assert!(kic_lab(&["sinr-sweep", "--config", &cfg], &b).status.success());
    let (ca, cb) = (read(&a, "sinr_sweep.csv"), read(&b, "sinr_sweep.csv"));
    assert_eq!(ca, cb);
    assert!(ca.lines().any(|l| l == "3,2,0,20,20"));
    assert_eq!(ca.lines().count(), 1 + 5 * 3);
}

#[test]
fn coherent_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"nodes": 4, "alphas": [3.0], "m_list": [1]}"#);
    let out = kic_lab(&["sinr-sweep", "--config", &cfg, "--accounting", "coherent"], dir.path());
    assert!(out.status.success());
    let csv = read(dir.path(), "sinr_sweep.csv");
    let row = csv.lines().find(|l| l.starts_with("3,3,1,")).unwrap();
    let actual: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((actual - 15.706_515_270_763_383).abs() < 1e-9);
}

#[test]
fn bounds_report_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = kic_lab(&["bounds-report"], dir.path());
    assert!(out.status.success());
    let nodes = read(dir.path(), "bounds_report.csv");
    assert!(nodes.starts_with("alpha,i,m,rho,pi_bound,sinr_lb_db,feasible,min_rounds\n"));
    assert!(nodes.contains("infeasible"));
    let chain = read(dir.path(), "chain_length.csv");
    assert!(chain.lines().any(|l| l.starts_with("4,two_minus_epsilon,") && l.ends_with(",16")));
}

#[test]
fn example_n5_trace() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kic_lab(&["example-n5"], dir.path()).status.success());
    let csv = read(dir.path(), "example_n5_trace.csv");
    assert!(csv.starts_with("slot,node,packet_index\n"));
    assert_eq!(csv.lines().count(), 1 + 20 * 5);
    assert!(csv.lines().any(|l| l == "14,4,1"));
    assert!(csv.lines().any(|l| l == "13,4,-"));
}

#[test]
fn monte_carlo_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"nodes": 4, "alphas": [3.0], "monte_carlo": {"trials": 20000, "seed": 5, "max_node": 4, "rounds": [1]}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let run = |d: &Path, seed: &str| kic_lab(&["monte-carlo", "--config", &cfg, "--seed", seed, "--tolerance", "0.05"], d);
    assert!(run(&a, "9").status.success());
    assert!(run(&b, "9").status.success());
    assert!(run(&c, "10").status.success());
    assert_eq!(read(&a, "monte_carlo.csv"), read(&b, "monte_carlo.csv"));
    assert_ne!(read(&a, "monte_carlo.csv"), read(&c, "monte_carlo.csv"));
    assert!(read(&a, "monte_carlo.csv").lines().nth(1).unwrap().starts_with("3,3,1,20000,9,"));
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kic-lab"))
        .arg("delay-table")
        .env("KIC_LAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("delay_table.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"alphas": [-3.0]}"#);
    let out = kic_lab(&["sinr-sweep", "--config", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alphas"));

    let broken = write_config(dir.path(), "{\"nodes\": ");
    assert_eq!(kic_lab(&["delay-table", "--config", &broken], dir.path()).status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    let out = kic_lab(&["delay-table", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let no_mc = write_config(dir.path(), "{}");
    assert_eq!(kic_lab(&["monte-carlo", "--config", &no_mc], dir.path()).status.code(), Some(2));
}

#[test]
fn infeasible_adaptive_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"alphas": [2.1], "m_policy": "adaptive_min"}"#);
    let out = kic_lab(&["sinr-sweep", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn tolerance_violation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"nodes": 4, "alphas": [3.0], "monte_carlo": {"trials": 10, "max_node": 4, "rounds": [0]}}"#,
    );
    let out = kic_lab(&["monte-carlo", "--config", &cfg, "--tolerance", "0.000001"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}
