//! Fixed-point solvers: contraction iteration, Markov power iteration,
//! grid subdivision and surrogate-guided search.

mod banach;
mod grid_search;
pub mod halton;
pub mod maps;
mod markov;
mod surrogate;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use banach::{banach_iterate, CONTRACTION_WINDOW, DIVERGENCE_FACTOR};
pub use grid_search::{grid_fixed_point_search, INITIAL_DIVISIONS, MAX_SEARCH_DIM};
pub use markov::{empirical_contraction, markov_invariant, ContractionMetric, MarkovKernel};
pub use surrogate::{
    surrogate_guided_search, RoundTrace, SearchBlock, SurrogateModel, SurrogateSearch, SurrogateSearchConfig,
};

/// Outcome of a successful solve. `residual` always comes from a true map
/// evaluation at `point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub point: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub empirical_contraction: Option<f64>,
    pub evaluations: usize,
}
