//! `ffsum` — command-line front end for the correlation-asymptotics
//! library: identity sweeps, determinant convergence studies, dressed
//! Bethe quantities, multipoint term assembly, and a quick selftest.
//!
//! Exit codes: 0 = success, 1 = a numerical threshold failed or the
//! computation broke down, 2 = the inputs were rejected.

mod commands;
mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Failure modes, split by exit code: rejected inputs (2) versus a
/// numerical breakdown or missed threshold (1).
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numeric(String),
}

impl Failure {
    pub fn validation(msg: impl Into<String>) -> Failure {
        Failure::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Failure {
        Failure::Numeric(msg.into())
    }
}

/// Library errors that describe bad parameters keep exit code 2; the
/// rest can only surface mid-computation and map to 1.
pub fn classify(e: ffsum_core::Error) -> Failure {
    use ffsum_core::Error as E;
    match e {
        E::Invalid { .. }
        | E::OutOfDomain { .. }
        | E::HalfIntegerShift { .. }
        | E::DeformationSign { .. }
        | E::MissingAmplitude { .. }
        | E::IntegerOffset { .. } => Failure::Validation(e.to_string()),
        _ => Failure::Numeric(e.to_string()),
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser)]
#[command(name = "ffsum", version, about = "Correlation-asymptotics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value config file (later KEY=VALUE args override it)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Write the report to this file instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Worker threads for the parallel sums (0 = library default)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Seed for the random sweeps
    #[arg(long, global = true, default_value_t = 17)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Truncated vs. closed restricted-sum identity sweep
    Identity {
        /// KEY=VALUE overrides (see README for the per-command keys)
        #[arg(value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Determinant convergence toward the jump asymptotics
    Toeplitz {
        #[arg(value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Dressed charge, phase and momentum on the Fermi interval
    Dressed {
        #[arg(value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Asymptotic term assembly for an r-point spec
    Multipoint {
        #[arg(value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Quick cross-module desk checks
    Selftest,
}

fn load(cli: &Cli, set: &[String]) -> Result<config::Config, Failure> {
    let mut cfg = config::Config::load(cli.config.as_deref())?;
    cfg.apply_overrides(set)?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::numeric(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| Failure::numeric(format!("cannot write stdout: {e}"))),
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let outcome = match &cli.command {
        Command::Identity { set } => commands::identity(&load(cli, set)?, cli.seed, cli.format)?,
        Command::Toeplitz { set } => commands::toeplitz(&load(cli, set)?, cli.format)?,
        Command::Dressed { set } => commands::dressed(&load(cli, set)?, cli.format)?,
        Command::Multipoint { set } => commands::multipoint(&load(cli, set)?, cli.format)?,
        Command::Selftest => commands::selftest()?,
    };
    emit(cli.out.as_deref(), &outcome.body)?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // AlreadyInitialized can't hurt: the pool then simply keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
