use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::CliResult;

#[derive(Debug, Parser)]
#[command(name = "metafix", version, about = "Fixed-point solvers and self-modifying agent simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a fixed-point solver on a built-in map or a kernel file.
    Solve(SolveArgs),
    /// Simulate one scenario and write its trajectory and report.
    Simulate(SimulateArgs),
    /// Run a grid of scenarios and write one summary row per cell.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Banach,
    Markov,
    Grid,
    Surrogate,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub solver: Solver,
    /// Built-in map id: name plus dimension, e.g. `cos1d`, `spiral2d`.
    #[arg(long)]
    pub map: Option<String>,
    /// Headerless CSV of kernel rows (markov solver).
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Residual tolerance for the banach and markov solvers.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Residual target for the grid and surrogate searches.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Iteration cap (banach, markov) or true-evaluation budget (searches).
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Starting point for banach, comma separated; defaults to the domain center.
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<f64>>,
    /// Result file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario config (TOML).
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep config (TOML): a `[sweep]` table plus the base `[scenario]`.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Largest number of cells (parameter combinations times replications).
    #[arg(long, default_value_t = crate::sweep::DEFAULT_MAX_CELLS)]
    pub max_cells: usize,
}

impl Cli {
    pub fn execute(self) -> CliResult<()> {
        match self.command {
            Command::Solve(a) => crate::solve::cmd_solve(&a),
            Command::Simulate(a) => crate::simulate::cmd_simulate(&a),
            Command::Sweep(a) => crate::sweep::cmd_sweep(&a),
        }
    }
}
