//! Black-box CLI tests: exit codes, output layout and byte determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn selfgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfgrid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn validate_valid_fixture_exits_zero_with_empty_stdout() {
    let out = selfgrid(&["validate", "--grid", &fixture("grid30.toml")]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty(), "report should be empty");
}

#[test]
fn validate_rejects_malformed_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "s_base = ").unwrap();
    let out = selfgrid(&["validate", "--grid", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_flips_grid4_partition_between_the_two_epsilons() {
    let out = selfgrid(&[
        "sweep",
        "--grid",
        &fixture("grid4.toml"),
        "--epsilon",
        "0.3,0.5",
        "--mode",
        "pfc",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines[0],
        "epsilon,subnetworks,max_block,uncontrollable_buses"
    );
    assert!(lines[1].starts_with("0.3,1,"), "line: {}", lines[1]);
    assert!(lines[2].starts_with("0.5,2,"), "line: {}", lines[2]);
}

#[test]
fn sweep_single_epsilon_gives_single_row() {
    let out = selfgrid(&[
        "sweep",
        "--grid",
        &fixture("grid4.toml"),
        "--epsilon",
        "0.4",
        "--mode",
        "pfc",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
}

#[test]
fn sweep_rejects_epsilon_outside_unit_interval() {
    let out = selfgrid(&[
        "sweep",
        "--grid",
        &fixture("grid4.toml"),
        "--epsilon",
        "1.5",
        "--mode",
        "pfc",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_quiescent_scenario_exits_zero_with_one_round() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfgrid(&[
        "run",
        "--grid",
        &fixture("grid30.toml"),
        "--scenario",
        &fixture("quiescent.toml"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report = read(dir.path(), "report.csv");
    assert_eq!(report.lines().count(), 2, "header + one round");
    assert!(report.lines().nth(1).unwrap().starts_with("0,0.45,0,"));
    let log = read(dir.path(), "messages.log");
    assert!(log.lines().all(|l| l.contains("ASG<")));
}

#[test]
fn run_exhausted_scenario_exits_one_and_reports_unresolved() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfgrid(&[
        "run",
        "--grid",
        &fixture("grid30.toml"),
        "--scenario",
        &fixture("exhausted.toml"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("epsilon ladder exhausted"), "{stderr}");
}

#[test]
fn decompose_prints_one_record_per_subnetwork() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfgrid(&[
        "decompose",
        "--grid",
        &fixture("grid4.toml"),
        "--epsilon",
        "0.5",
        "--mode",
        "pfc",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let subnet_lines = stdout
        .lines()
        .filter(|l| l.starts_with("subnetwork "))
        .count();
    assert_eq!(subnet_lines, 2);
    let matrix = read(dir.path(), "permutation.csv");
    assert!(matrix.starts_with("bus,"));
}

#[test]
fn compare_writes_per_method_reports_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfgrid(&[
        "compare",
        "--grid",
        &fixture("grid30.toml"),
        "--scenario",
        &fixture("cs2_solo_b.toml"),
        "--methods",
        "proposed,global,local",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{:?}", out);
    let comparison = read(dir.path(), "comparison.csv");
    assert!(comparison.starts_with("method,involved_dgs,involved_nodes,"));
    assert_eq!(comparison.lines().count(), 4);
    let profile = read(dir.path(), "voltage_profile.csv");
    assert!(profile.starts_with("bus,v_before,v_after_proposed,v_after_global,v_after_local"));
    for prefix in ["proposed_", "global_", "local_"] {
        read(dir.path(), &format!("{prefix}report.csv"));
        read(dir.path(), &format!("{prefix}messages.log"));
    }
    // Local control has no communication at all.
    assert_eq!(read(dir.path(), "local_messages.log"), "");
}

#[test]
fn outputs_are_byte_identical_across_repeated_runs() {
    let run_once = || -> (String, String, String) {
        let dir = tempfile::tempdir().unwrap();
        let out = selfgrid(&[
            "run",
            "--grid",
            &fixture("grid30.toml"),
            "--scenario",
            &fixture("cs3_self_org.toml"),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
        (
            read(dir.path(), "report.csv"),
            read(dir.path(), "voltages.csv"),
            read(dir.path(), "messages.log"),
        )
    };
    let first = run_once();
    let second = run_once();
    assert_eq!(first, second);
}

#[test]
fn run_rejects_scenario_referencing_unknown_dg() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.toml");
    std::fs::write(
        &scenario,
        r#"
[config]
mode = "pfc"
ladder = [0.3]
v_lower = 0.95
v_upper = 1.05
max_rounds = 4

[[events]]
round = 0
kind = "dg_trip"
dg = 99
"#,
    )
    .unwrap();
    let out = selfgrid(&[
        "run",
        "--grid",
        &fixture("grid4.toml"),
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let out = selfgrid(&["run", "--grid", "nope.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_selfgrid"))
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn paths_are_reported_in_errors() {
    let missing = PathBuf::from("/nonexistent/grid.toml");
    let out = selfgrid(&["validate", "--grid", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("/nonexistent/grid.toml"));
}
