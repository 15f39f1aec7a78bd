//! End-to-end runs of the `engage` binary against a small config.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn engage() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_engage"));
    cmd.env_remove("ENGAGE_OUT");
    cmd
}

fn bank_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../banks/default")
}

/// A config small enough for test runs: five historical students, four in
/// the training corpus, a six-student trial, and a two-epoch fit.
fn write_config(dir: &Path) -> PathBuf {
    let text = format!(
        "masterSeed = 11\nbank = {:?}\noutputDir = {:?}\n\n\
         [population]\nhistory = 5\ndrlCorpus = 4\ntrial = 6\n\n\
         [ddqn]\nepochs = 2\nbatchSize = 16\n",
        bank_dir(),
        dir.join("out")
    );
    let path = dir.join("engage.toml");
    fs::write(&path, text).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn pipeline_runs_once_then_skips() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());

    let first = engage()
        .args(["pipeline", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    let stdout = stdout_of(&first);
    assert_eq!(stdout.lines().filter(|l| l.ends_with(" ran")).count(), 6);
    assert!(dir.path().join("out/report.txt").exists());
    assert!(dir.path().join("out/report.tsv").exists());

    let second = engage()
        .args(["pipeline", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    let stdout = stdout_of(&second);
    assert_eq!(stdout.lines().filter(|l| l.ends_with(" ran")).count(), 0);
    assert_eq!(
        stdout.lines().filter(|l| l.ends_with("up to date")).count(),
        6
    );
}

#[test]
fn phase_verbs_stop_where_they_say() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());

    let output = engage()
        .args(["simulate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    stdout_of(&output);
    assert!(dir.path().join("out/history.sessions.jsonl").exists());
    assert!(!dir.path().join("out/thresholds.json").exists());

    let output = engage()
        .args(["bkt-thresholds", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    let stdout = stdout_of(&output);
    assert!(dir.path().join("out/thresholds.json").exists());
    assert!(stdout.contains("history"), "{stdout}");
    assert!(!dir.path().join("out/model.json").exists());
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());

    let output = engage()
        .args(["simulate", "--seed", "7", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    stdout_of(&output);

    let resolved = fs::read_to_string(dir.path().join("out/config.resolved.toml")).unwrap();
    assert!(resolved.contains("# masterSeed 7"), "{resolved}");
    assert!(resolved.contains("masterSeed = 7"), "{resolved}");
}

#[test]
fn env_var_redirects_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let elsewhere = dir.path().join("elsewhere");

    let output = engage()
        .env("ENGAGE_OUT", &elsewhere)
        .args(["simulate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    stdout_of(&output);
    assert!(elsewhere.join("history.sessions.jsonl").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn validate_problems_checks_the_bank() {
    let output = engage()
        .arg("validate-problems")
        .arg("--bank")
        .arg(bank_dir())
        .output()
        .unwrap();
    let stdout = stdout_of(&output);
    assert!(stdout.contains("problems validate"), "{stdout}");
}

#[test]
fn missing_config_fails_and_names_the_path() {
    let output = engage()
        .args(["pipeline", "--config", "/nonexistent/engage.toml"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/nonexistent/engage.toml"), "{stderr}");
}
