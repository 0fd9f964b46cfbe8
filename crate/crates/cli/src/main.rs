//! `rzf-secrecy`: analytic and simulated secrecy performance of RZF precoding.
//!
//! Exit codes: 0 success, 1 I/O failure or failed validation, 2 invalid
//! input, 3 numerical-regime abort.

mod commands;
mod grid;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rzf_secrecy::Normalization;

use crate::grid::Grid;

#[derive(Parser)]
#[command(name = "rzf-secrecy", version, about = "Secrecy analysis of RZF precoding in MISO broadcast channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic equivalents, ergodic secrecy rates and CLT covariances per user
    Analyze(AnalyzeArgs),
    /// Analytic vs simulated secrecy outage probability over a rate grid
    Montecarlo(McArgs),
    /// Sweep one scenario parameter and report rates, outage and antenna requirements
    Sweep(SweepArgs),
    /// Outage-quantile rates for uncorrelated channels and their empirical outage fractions
    Quantiles(QuantileArgs),
    /// Analytic self-consistency checks
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Bits,
    Nats,
}

impl Units {
    /// Factor converting nats into these units.
    pub fn from_nats(self) -> f64 {
        match self {
            Units::Bits => std::f64::consts::LOG2_E,
            Units::Nats => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    LeaveOneOut,
    FullSystem,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::LeaveOneOut => Normalization::LeaveOneOut,
            NormArg::FullSystem => Normalization::FullSystem,
        }
    }
}

#[derive(Args, Clone)]
pub struct Common {
    /// Scenario JSON file
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output CSV path; a JSON manifest is written next to it. Without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nats")]
    units: Units,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Power-normalization equivalent used by the analytic formulas
    #[arg(long, value_enum, default_value = "full-system")]
    normalization: NormArg,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Only this user (0-based); default all users
    #[arg(long)]
    user: Option<usize>,
}

#[derive(Args)]
pub struct McArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rate thresholds, in --units
    #[arg(long, default_value = "0:3:0.1")]
    grid: Grid,
    #[arg(long, default_value_t = 0)]
    user: usize,
    /// Add the O(1/M) curvature correction to the outage centers
    #[arg(long)]
    second_order: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Z,
    Sigma2Db,
    Rho2Db,
    M,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Parameter to sweep; SNRs are in dB
    #[arg(long, value_enum)]
    param: SweepParam,
    #[arg(long)]
    grid: Grid,
    /// Target rate for the outage columns, in --units
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Monte-Carlo trials per sweep point (0 = analytic only)
    #[arg(long, default_value_t = 0)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    user: usize,
}

#[derive(Args)]
pub struct QuantileArgs {
    #[command(flatten)]
    common: Common,
    /// Outage levels q
    #[arg(long, default_value = "0.1:0.9:0.1")]
    grid: Grid,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Trials for an optional simulation cross-check (0 = analytic only)
    #[arg(long, default_value_t = 0)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Montecarlo(a) => commands::montecarlo(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Quantiles(a) => commands::quantiles(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
