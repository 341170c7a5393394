//! `fockgen` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure.

mod commands;
mod config;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fockgen::ReconstructionMode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String, #[source] fockgen::Error),
    #[error("cannot write {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Core(#[from] fockgen::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(..) | CliError::Io(..) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fockgen", version, about = "Heralded photon-number state simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: `out`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Reconstruction estimator.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<ReconstructionMode>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    /// Pulse-area histogram CSV (bin_low,bin_high,count).
    #[arg(long, value_name = "PATH")]
    pub histogram: Option<PathBuf>,
    /// Monitor detection efficiency.
    #[arg(long)]
    pub efficiency: Option<f64>,
    /// Monitor dark counts per pulse (default 0).
    #[arg(long)]
    pub dark_mean: Option<f64>,
    /// Reconstruction truncation N.
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Peaks to fit (default: N + 1, or one per gain step in the histogram).
    #[arg(long)]
    pub n_peaks: Option<usize>,
    /// Expected peak spacing (default 1).
    #[arg(long)]
    pub gain_hint: Option<f64>,
    /// Fit equally spaced peak centers.
    #[arg(long)]
    pub shared_spacing: bool,
}

fn parse_mode(s: &str) -> Result<ReconstructionMode, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte Carlo and write records and histograms.
    Simulate(Common),
    /// Fit a pulse-area histogram and invert detector losses.
    Reconstruct(ReconstructArgs),
    /// Fidelity and rate against pump power.
    Sweep(Common),
    /// Coincidence-based efficiency estimate.
    Klyshko(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => commands::simulate(c),
        Command::Reconstruct(a) => commands::reconstruct_cmd(a),
        Command::Sweep(c) => commands::sweep_cmd(c),
        Command::Klyshko(c) => commands::klyshko(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
