use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rydberg-dsf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("RUST_LOG", "error").output().unwrap()
}

const SMALL: &str = r#"
[lattice]
sites = 3

[evolution]
delta = 0.2
steps = 15
omega_points = 128

[noise]
samples = 32

[mitigation]
n_u = 10
n_m = 20

[run]
seed = 7
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("experiment.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn every_subcommand_runs_in_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for stage in ["prepare", "dsf", "noise", "mitigate", "qfi", "oracle"] {
        let o = run(&[stage, "--config", &cfg, "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).starts_with(stage));
        assert!(Path::new(out).join(format!("manifest-{stage}.toml")).exists());
    }
    let qfi = fs::read_to_string(Path::new(out).join("qfi.toml")).unwrap();
    assert!(qfi.contains("classification"));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "12345"]);
    assert_eq!(o.status.code(), Some(0));
    let written = fs::read_to_string(out.join("config-oracle.toml")).unwrap();
    assert!(written.contains("seed = 12345"), "{written}");
}

#[test]
fn invalid_configs_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad_value = write_config(dir.path(), "[lattice]\nsites = 1\n");
    assert_eq!(run(&["oracle", "--config", &bad_value]).status.code(), Some(2));
    let typo = write_config(dir.path(), "[lattice]\nsites = 3\nsitez = 4\n");
    assert_eq!(run(&["oracle", "--config", &typo]).status.code(), Some(2));
    let zero_steps = write_config(dir.path(), "[lattice]\nsites = 3\n[evolution]\ndelta = 0.2\nsteps = 0\n");
    assert_eq!(run(&["dsf", "--config", &zero_steps]).status.code(), Some(2));
    assert_eq!(run(&["oracle"]).status.code(), Some(2));
    assert_eq!(run(&["oracle", "--config", "/nonexistent/experiment.toml"]).status.code(), Some(2));
}

#[test]
fn missing_artifacts_fail_with_a_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["mitigate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise"));
    assert!(out.join("FAILED-mitigate").exists());
}

#[test]
fn physical_mode_without_sweep_parameters_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["prepare", "--config", &cfg, "--out", out.to_str().unwrap(), "--mode", "physical"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
}
