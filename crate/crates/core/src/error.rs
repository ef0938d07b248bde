use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("distributions live on different grids")]
    GridMismatch,

    #[error("problem has {cells} cells, cap is {cap}")]
    Size { cells: usize, cap: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        point: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("power iteration did not settle after {iterations} iterations")]
    MarkovNonConvergence {
        last: Vec<f64>,
        previous: Vec<f64>,
        iterations: usize,
    },

    #[error("iteration diverged at step {iterations} (residual {residual:e})")]
    Divergence {
        point: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("evaluation budget exhausted after {evaluations} evaluations (best residual {residual:e})")]
    BudgetExhausted {
        best: Vec<f64>,
        residual: f64,
        evaluations: usize,
    },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("every sampled pair was degenerate")]
    Sampling,

    #[error("history holds {available} snapshots, {needed} required")]
    History { needed: usize, available: usize },

    #[error("operation not available in mode {0}")]
    Mode(String),

    #[error("surrogate fit failed: {0}")]
    Surrogate(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn dim(expected: usize, found: usize) -> Self {
        Error::Dimension { expected, found }
    }
}
