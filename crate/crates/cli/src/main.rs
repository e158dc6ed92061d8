//! `choquard-lab`: parameter checks, ground-state solves and verification
//! runs for the Choquard system, driven by a JSON config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Config;

/// How a command failed. Scientific failures exit with 1, usage and
/// configuration problems with 2.
#[derive(Debug)]
pub enum Failure {
    Science(String),
    Usage(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Scalar,
    System,
    Picard,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Scalar => "scalar",
            Mode::System => "system",
            Mode::Picard => "picard",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    H1,
    H2,
}

#[derive(Parser)]
#[command(name = "choquard-lab", version, about)]
struct Cli {
    /// Worker threads for the transforms (defaults to all cores).
    #[arg(long, global = true, env = "CHOQUARD_LAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print admissibility verdicts and an exponent pair for the config.
    Params {
        config: PathBuf,
        /// Hypothesis set that decides the exit code.
        #[arg(long, value_enum, default_value = "h1")]
        require: Hypothesis,
    },
    /// Compute a ground state and write fields and reports.
    Solve {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "system")]
        mode: Mode,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides `solve.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the solvers and the full check suite.
    Verify {
        config: PathBuf,
        #[arg(long, default_value = "verify_out")]
        out: PathBuf,
        /// Overrides `solve.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the admissible (p, q) raster as CSV.
    Region {
        #[arg(long = "dimension", short = 'N')]
        dimension: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<Config, Failure> {
    let mut config = Config::load(path)?;
    if let Some(s) = seed {
        config.solve.seed = s;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Params { config, require } => commands::params(&load(&config, None)?, require),
        Command::Solve { config, mode, out, seed } => {
            commands::solve(&load(&config, seed)?, mode, &out)
        }
        Command::Verify { config, out, seed } => commands::verify(&load(&config, seed)?, &out),
        Command::Region {
            dimension,
            alpha,
            resolution,
            out,
        } => commands::region(dimension, alpha, resolution, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Science(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
