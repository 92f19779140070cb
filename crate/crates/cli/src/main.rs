//! `relu-regions`: run Monte Carlo experiments, emit theory tables and
//! evaluate region-adaptive sparsity.
//!
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 internal
//! invariant violation.

mod commands;
mod error;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "relu-regions",
    version,
    about = "Linear regions of random 1D ReLU networks"
)]
pub struct Cli {
    /// Seed; overrides `base_seed` in a simulate config and keys sampled networks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo trials. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the experiment described by a JSON config.
    Simulate(SimulateArgs),
    /// Emit the variance/density/coefficient table and expected crossing counts.
    Theory(TheoryArgs),
    /// Evaluate a network against a target function.
    Sparsity(SparsityArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Path to an experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Skip the per-trial CSV.
    #[arg(long)]
    pub no_trials_csv: bool,
}

#[derive(Args, Debug)]
pub struct TheoryArgs {
    /// Layers as `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "1..3")]
    pub layers: String,
    /// Inputs as `start:stop:count` or a comma list.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_b: f64,
    /// Crossing intervals `A:B` (repeatable; `inf` allowed). The full line
    /// is always included.
    #[arg(long = "interval", allow_hyphen_values = true)]
    pub intervals: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SparsityArgs {
    /// Builtin family (abs, quadratic, sine) or a CSV file with columns x,y.
    #[arg(long)]
    pub target: String,
    /// Domain `A:B` for a builtin target.
    #[arg(long, default_value = "-1:1", allow_hyphen_values = true)]
    pub domain: String,
    /// Grid points for a builtin target.
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    #[arg(long)]
    pub eps0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub c: f64,
    /// Hidden widths, e.g. `10` or `64,64`; samples a network with `--seed`.
    #[arg(long, conflicts_with = "network")]
    pub topology: Option<String>,
    /// JSON network spec `{"topology":[..],"sigma_b":..,"seed":..}`.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_b: f64,
    /// Estimate E[L] from this many Monte Carlo networks instead of sum n + 1.
    #[arg(long, conflicts_with = "expected_regions")]
    pub mc_trials: Option<u64>,
    /// Use this value for E[L].
    #[arg(long)]
    pub expected_regions: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
