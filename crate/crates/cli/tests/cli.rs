//! End-to-end checks of the binary: exit codes, emitted files, replay.

use std::path::Path;
use std::process::Command;

fn macast() -> Command {
    Command::new(env!("CARGO_BIN_EXE_macast"))
}

#[test]
fn two_user_los_writes_csvs_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = macast()
        .args([
            "two-user-los",
            "--m",
            "9",
            "--n",
            "2",
            "--trials",
            "2",
            "--seed",
            "3",
            "--powers",
            "0,10",
            "--svg",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("two_user_los_trials.csv").exists());
    assert!(dir.path().join("two_user_los_summary.csv").exists());
    assert!(dir.path().join("two_user_los.svg").exists());
    let summary = std::fs::read_to_string(dir.path().join("two_user_los_summary.csv")).unwrap();
    assert!(summary.starts_with("power_dbm,method,mean_rate"));
}

#[test]
fn rerun_reproduces_identical_csv_bytes() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let out = macast()
            .args([
                "convergence", "--m", "9", "--n", "2", "--k", "2", "--trials", "2", "--seed",
                "11", "--out-dir",
            ])
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(
        read(dir_a.path(), "convergence_trials.csv"),
        read(dir_b.path(), "convergence_trials.csv")
    );
    assert_eq!(
        read(dir_a.path(), "convergence_summary.csv"),
        read(dir_b.path(), "convergence_summary.csv")
    );
}

#[test]
fn invalid_arguments_exit_nonzero() {
    // Non-square M.
    let out = macast().args(["convergence", "--m", "10"]).output().unwrap();
    assert!(!out.status.success());

    // Search methods outside the line-of-sight experiments.
    let out = macast()
        .args(["rate-vs-power", "--methods", "bab", "--trials", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");

    // Missing config file.
    let out = macast()
        .args(["convergence", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        r#"{
            "experiment": "bab_complexity",
            "grid_side": 3,
            "num_antennas": 2,
            "num_users": 2,
            "paths_per_user": 1,
            "trials": 5,
            "seed": 7,
            "m_sweep": [4, 9],
            "methods": ["bab", "exhaustive"]
        }"#,
    )
    .unwrap();
    let out = macast()
        .args(["bab-complexity", "--config"])
        .arg(&config_path)
        .args(["--trials", "2", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let trials = std::fs::read_to_string(dir.path().join("bab_complexity_trials.csv")).unwrap();
    // The --trials flag overrode the config file's 5.
    let max_trial = trials
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse::<usize>().unwrap())
        .max()
        .unwrap();
    assert_eq!(max_trial, 1);
}

#[test]
fn replay_reports_rates() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = dir.path().join("scenario.json");
    let users = macast::channel::sample_los_pair(
        &macast::channel::ScenarioRng::new(9, 0),
        150.0,
        5.0,
        3.16e-13,
    )
    .unwrap();
    macast::channel::write_scenario(&scenario_path, &users).unwrap();
    let out = macast()
        .arg("replay")
        .arg(&scenario_path)
        .args(["--m", "9", "--n", "2", "--methods", "bab,greedy,fpa"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("bab"), "stdout: {stdout}");
    assert!(stdout.contains("bits/s/Hz"));
}
