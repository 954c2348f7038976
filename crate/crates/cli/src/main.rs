//! `ptpb`: simulation, feasibility analysis and sweeps from JSON configs.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Failure classes, one exit code each.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or malformed config (exit 2).
    Parse(String),
    /// Config parsed but describes an invalid scenario (exit 3).
    Invalid(String),
    /// The run ended with a status other than completed (exit 4).
    Run(String),
    /// Writing artifacts failed (exit 1).
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Parse(_) => 2,
            Self::Invalid(_) => 3,
            Self::Run(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Parse(m) | Self::Invalid(m) | Self::Run(m) | Self::Io(m) => m,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "ptpb",
    version,
    about = "Prescribed-time prescribed-bound control of Euler-Lagrange systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write trace.csv, metrics.json and optionally tracking.svg.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the disturbance and noise seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write tracking.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Evaluate the feasibility calculus and write feasibility.json and viable_samples.csv.
    Feasibility {
        #[arg(long)]
        config: PathBuf,
        /// Monte-Carlo sample count (0 skips sampling).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross product of the sweep axes and write summary.csv plus one directory per cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            svg,
        } => commands::simulate(&config, out, seed, svg),
        Command::Feasibility {
            config,
            samples,
            out,
        } => commands::feasibility(&config, samples, out),
        Command::Sweep { config, jobs, out } => commands::sweep(&config, jobs, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
