//! `rydberg-dsf`: runs one pipeline stage from a TOML experiment config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rydberg_dsf::config::ExperimentConfig;
use rydberg_dsf::lattice::UnitMode;
use rydberg_dsf::pipeline::{run_stage, Stage};
use rydberg_dsf::Error;

#[derive(Parser, Debug)]
#[command(name = "rydberg-dsf", version, about = "Rydberg chain emulator: state prep, Green's functions, DSF, noise, mitigation, QFI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides run.output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Unit convention; overrides lattice.units.
    #[arg(long, global = true, value_enum)]
    mode: Option<Units>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Prepare the initial state and report its ED fidelity.
    Prepare,
    /// Green's tables and structure factors for the configured modes.
    Dsf,
    /// Noiseless and noisy Green's tables with shot records.
    Noise,
    /// Calibrate and mitigate the noisy tables.
    Mitigate,
    /// QFI density, depth classification and the F_n route.
    Qfi,
    /// ED reference: ground state, X/Y/Z Green's tables, sum-rule constant.
    Oracle,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Units {
    Model,
    Physical,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::Prepare => Stage::Prepare,
            Command::Dsf => Stage::Dsf,
            Command::Noise => Stage::Noise,
            Command::Mitigate => Stage::Mitigate,
            Command::Qfi => Stage::Qfi,
            Command::Oracle => Stage::Oracle,
        }
    }
}

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_numerical() => EXIT_NUMERICAL,
        Error::SingularCalibration { .. } => EXIT_NUMERICAL,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, String> {
    let path = cli.config.as_ref().ok_or("--config PATH is required")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.run.output = out.to_string_lossy().into_owned();
    }
    if let Some(mode) = cli.mode {
        cfg.lattice.units = match mode {
            Units::Model => UnitMode::Model,
            Units::Physical => UnitMode::Physical,
        };
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let stage = cli.command.stage();
    match run_stage(&cfg, stage) {
        Ok(manifest) => {
            println!("{} {} -> {}", stage.name(), manifest.manifest_hash, cfg.run.output);
            for f in &manifest.files {
                println!("  {}", f.name);
            }
            if !manifest.warnings.is_empty() {
                println!("  {} warning(s) recorded in the manifest", manifest.warnings.len());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_documented_exit_codes() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), EXIT_VALIDATION);
        assert_eq!(exit_code(&Error::Unsupported("x".into())), EXIT_VALIDATION);
        assert_eq!(exit_code(&Error::NumericalInstability { drift: 1.0, suggested_dt: 0.1 }), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::SingularCalibration { qubit: 0 }), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Linalg("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
    }
}
