use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::abs;
use crate::goalspace::{total_variation, wasserstein1, DiscreteDistribution, Grid};
use crate::rng::{self, purpose};

const ROW_TOLERANCE: f64 = 1e-9;

/// Row-stochastic matrix over the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    n: usize,
    rows: Vec<f64>,
    grid: Arc<Grid>,
}

impl MarkovKernel {
    /// Rows summing to one within 1e-9 are renormalized exactly.
    pub fn new(rows: Vec<Vec<f64>>, grid: Arc<Grid>) -> Result<Self> {
        let n = grid.num_cells();
        if rows.len() != n {
            return Err(Error::dim(n, rows.len()));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::dim(n, row.len()));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Invalid(alloc::format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if abs(s - 1.0) > ROW_TOLERANCE {
                return Err(Error::Invalid(alloc::format!("row {i} sums to {s}")));
            }
            flat.extend(row.iter().map(|p| p / s));
        }
        Ok(MarkovKernel { n, rows: flat, grid })
    }

    /// Kernel on `n` cells of the unit interval.
    pub fn on_unit_line(rows: Vec<Vec<f64>>) -> Result<Self> {
        let grid = Arc::new(Grid::line(0.0, 1.0, rows.len().max(1))?);
        Self::new(rows, grid)
    }

    pub fn identity(grid: Arc<Grid>) -> Self {
        let n = grid.num_cells();
        let mut rows = alloc::vec![0.0; n * n];
        (0..n).for_each(|i| rows[i * n + i] = 1.0);
        MarkovKernel { n, rows, grid }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks(self.n)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.n + j]
    }

    /// `mu T`.
    pub fn apply(&self, mu: &DiscreteDistribution) -> Result<DiscreteDistribution> {
        if mu.grid().num_cells() != self.n || **mu.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = alloc::vec![0.0; self.n];
        for (p, row) in mu.probs().iter().zip(self.rows()) {
            if *p == 0.0 {
                continue;
            }
            for (o, t) in out.iter_mut().zip(row) {
                *o += p * t;
            }
        }
        let total = out.iter().sum();
        Ok(DiscreteDistribution::renormalized(out, self.grid.clone(), total))
    }

    /// Exact TV contraction factor `1 - min_{i,k} sum_j min(T_ij, T_kj)`.
    pub fn dobrushin(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in i + 1..self.n {
                let overlap: f64 = self.row(i).iter().zip(self.row(k)).map(|(a, b)| a.min(*b)).sum();
                worst = worst.max(1.0 - overlap);
            }
        }
        worst
    }
}

/// Power iteration from the uniform distribution. The returned `mu`
/// satisfies `TV(mu T, mu) < tol`.
pub fn markov_invariant(kernel: &MarkovKernel, tol: f64, max_iter: usize) -> Result<DiscreteDistribution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut mu = DiscreteDistribution::uniform(kernel.grid.clone());
    let mut previous = mu.clone();
    for _ in 0..max_iter {
        let next = kernel.apply(&mu)?;
        if total_variation(&next, &mu)? < tol {
            return Ok(mu);
        }
        previous = core::mem::replace(&mut mu, next);
    }
    Err(Error::MarkovNonConvergence {
        last: mu.probs().to_vec(),
        previous: previous.probs().to_vec(),
        iterations: max_iter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContractionMetric {
    Tv,
    W1,
}

impl ContractionMetric {
    pub fn distance(self, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
        match self {
            ContractionMetric::Tv => total_variation(p, q),
            ContractionMetric::W1 => wasserstein1(p, q),
        }
    }
}

/// Largest observed `d(mu T, nu T) / d(mu, nu)` over seeded pairs. Even
/// pairs are Dirichlet(1) draws, odd pairs are distinct point masses
/// (where the TV supremum is attained).
pub fn empirical_contraction(
    kernel: &MarkovKernel,
    metric: ContractionMetric,
    num_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if num_pairs == 0 {
        return Err(Error::invalid("num_pairs must be at least 1"));
    }
    let n = kernel.n;
    let grid = kernel.grid.clone();
    let mut r = rng::stream(seed, purpose::PAIRS, 0);
    let mut best: Option<f64> = None;
    for k in 0..num_pairs {
        let (mu, nu) = if k % 2 == 0 {
            (dirichlet(&mut r, grid.clone()), dirichlet(&mut r, grid.clone()))
        } else {
            if n < 2 {
                continue;
            }
            let i = r.random_range(0..n);
            let j = (i + r.random_range(1..n)) % n;
            (
                DiscreteDistribution::point_mass(grid.clone(), i)?,
                DiscreteDistribution::point_mass(grid.clone(), j)?,
            )
        };
        let d0 = metric.distance(&mu, &nu)?;
        if d0 <= 1e-300 {
            continue;
        }
        let d1 = metric.distance(&kernel.apply(&mu)?, &kernel.apply(&nu)?)?;
        let ratio = d1 / d0;
        best = Some(best.map_or(ratio, |b| b.max(ratio)));
    }
    best.ok_or(Error::Sampling)
}

fn dirichlet<R: Rng>(r: &mut R, grid: Arc<Grid>) -> DiscreteDistribution {
    let w: Vec<f64> = (0..grid.num_cells()).map(|_| Exp1.sample(r)).collect();
    let total = w.iter().sum();
    DiscreteDistribution::renormalized(w, grid, total)
}
