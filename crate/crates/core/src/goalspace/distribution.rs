use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::transport;
use super::DomainBox;
use crate::error::{Error, Result};
use crate::float::{abs, euclid, floor};

/// Largest number of cells a grid (and a transport problem) may have.
pub const DEFAULT_CELL_CAP: usize = 4096;

const SUM_TOLERANCE: f64 = 1e-9;

/// Regular grid of `cells_per_dim^n` equal cells over a domain box.
/// Cells are numbered row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    domain: DomainBox,
    cells_per_dim: usize,
}

impl Grid {
    pub fn new(domain: DomainBox, cells_per_dim: usize) -> Result<Self> {
        domain.validate()?;
        if cells_per_dim == 0 {
            return Err(Error::invalid("grid needs at least one cell per axis"));
        }
        let cells = checked_cells(cells_per_dim, domain.dim()).unwrap_or(usize::MAX);
        if cells > DEFAULT_CELL_CAP {
            return Err(Error::Size {
                cells,
                cap: DEFAULT_CELL_CAP,
            });
        }
        Ok(Grid {
            domain,
            cells_per_dim,
        })
    }

    /// One-dimensional grid over `[lo, hi]`.
    pub fn line(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Grid::new(DomainBox::new(alloc::vec![lo], alloc::vec![hi])?, cells)
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_dim.pow(self.dim() as u32)
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.domain.width(axis) / self.cells_per_dim as f64
    }

    pub fn multi_index(&self, mut cell: usize) -> Vec<usize> {
        let mut idx = alloc::vec![0; self.dim()];
        for slot in idx.iter_mut().rev() {
            *slot = cell % self.cells_per_dim;
            cell /= self.cells_per_dim;
        }
        idx
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.multi_index(cell)
            .into_iter()
            .enumerate()
            .map(|(axis, k)| self.domain.lo()[axis] + (k as f64 + 0.5) * self.width(axis))
            .collect()
    }

    /// Cell containing `x`; points outside the domain map to the nearest cell.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let m = self.cells_per_dim;
        x.iter().enumerate().fold(0, |acc, (axis, v)| {
            let t = (v - self.domain.lo()[axis]) / self.width(axis);
            let k = if t.is_nan() || t < 0.0 {
                0
            } else {
                (floor(t) as usize).min(m - 1)
            };
            acc * m + k
        })
    }
}

fn checked_cells(per_dim: usize, dim: usize) -> Option<usize> {
    (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(per_dim))
}

/// Probability vector over the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
    grid: Arc<Grid>,
}

impl DiscreteDistribution {
    /// Accepts sums within 1e-9 of one (renormalized); rejects negative entries.
    pub fn new(probs: Vec<f64>, grid: Arc<Grid>) -> Result<Self> {
        if probs.len() != grid.num_cells() {
            return Err(Error::dim(grid.num_cells(), probs.len()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if abs(total - 1.0) > SUM_TOLERANCE {
            return Err(Error::Invalid(alloc::format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self::renormalized(probs, grid, total))
    }

    /// Normalizes arbitrary nonnegative mass (e.g. histogram counts).
    pub fn from_weights(weights: Vec<f64>, grid: Arc<Grid>) -> Result<Self> {
        if weights.len() != grid.num_cells() {
            return Err(Error::dim(grid.num_cells(), weights.len()));
        }
        if weights.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("weights carry no mass"));
        }
        Ok(Self::renormalized(weights, grid, total))
    }

    pub(crate) fn renormalized(mut probs: Vec<f64>, grid: Arc<Grid>, total: f64) -> Self {
        if total != 1.0 {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        DiscreteDistribution { probs, grid }
    }

    pub fn uniform(grid: Arc<Grid>) -> Self {
        let n = grid.num_cells();
        DiscreteDistribution {
            probs: alloc::vec![1.0 / n as f64; n],
            grid,
        }
    }

    pub fn point_mass(grid: Arc<Grid>, cell: usize) -> Result<Self> {
        let n = grid.num_cells();
        if cell >= n {
            return Err(Error::Range(alloc::format!("cell {cell} outside grid of {n}")));
        }
        let mut probs = alloc::vec![0.0; n];
        probs[cell] = 1.0;
        Ok(DiscreteDistribution { probs, grid })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Range(alloc::format!("mixing weight {alpha}")));
        }
        let probs: Vec<f64> = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| alpha * p + (1.0 - alpha) * q)
            .collect();
        let total = probs.iter().sum();
        Ok(Self::renormalized(probs, self.grid.clone(), total))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, _)| i)
    }
}

pub fn total_variation(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if !p.same_grid(q) {
        return Err(Error::GridMismatch);
    }
    let s: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| abs(a - b)).sum();
    Ok((0.5 * s).min(1.0))
}

/// Earth mover's distance between cell centers (Euclidean ground cost).
/// One-dimensional grids use the CDF formula, others an exact transport solve.
pub fn wasserstein1(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if !p.same_grid(q) {
        return Err(Error::GridMismatch);
    }
    if p.grid.dim() == 1 {
        wasserstein1_cdf(p, q)
    } else {
        wasserstein1_transport(p, q, DEFAULT_CELL_CAP)
    }
}

/// `sum_i |CDF_p(i) - CDF_q(i)| * width`; one-dimensional grids only.
pub fn wasserstein1_cdf(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if !p.same_grid(q) {
        return Err(Error::GridMismatch);
    }
    if p.grid.dim() != 1 {
        return Err(Error::dim(1, p.grid.dim()));
    }
    let width = p.grid.width(0);
    let mut cdf = 0.0;
    let mut total = 0.0;
    for (a, b) in p.probs.iter().zip(&q.probs) {
        cdf += a - b;
        total += abs(cdf) * width;
    }
    // the final cumulative difference is rounding noise of two unit sums
    total -= abs(cdf) * width;
    Ok(total.max(0.0))
}

/// Exact transport between the positive and negative parts of `p - q`.
pub fn wasserstein1_transport(p: &DiscreteDistribution, q: &DiscreteDistribution, cap: usize) -> Result<f64> {
    if !p.same_grid(q) {
        return Err(Error::GridMismatch);
    }
    let cells = p.grid.num_cells();
    if cells > cap {
        return Err(Error::Size { cells, cap });
    }
    let mut supply = Vec::new();
    let mut demand = Vec::new();
    for (i, (a, b)) in p.probs.iter().zip(&q.probs).enumerate() {
        let d = a - b;
        if d > 0.0 {
            supply.push((i, d));
        } else if d < 0.0 {
            demand.push((i, -d));
        }
    }
    if supply.is_empty() || demand.is_empty() {
        return Ok(0.0);
    }
    let centers: Vec<Vec<f64>> = (0..cells).map(|c| p.grid.center(c)).collect();
    Ok(transport::min_cost(&supply, &demand, |i, j| euclid(&centers[i], &centers[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(cells: usize, lo: f64, hi: f64) -> Arc<Grid> {
        Arc::new(Grid::line(lo, hi, cells).unwrap())
    }

    #[test]
    fn tv_examples() {
        let g = line(2, 0.0, 2.0);
        let p = DiscreteDistribution::new(vec![0.7, 0.3], g.clone()).unwrap();
        let q = DiscreteDistribution::new(vec![0.5, 0.5], g.clone()).unwrap();
        assert!((total_variation(&p, &q).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let a = DiscreteDistribution::point_mass(g.clone(), 0).unwrap();
        let b = DiscreteDistribution::point_mass(g, 1).unwrap();
        assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn w1_examples() {
        // centers at 0 and 1
        let g = line(2, -0.5, 1.5);
        let a = DiscreteDistribution::point_mass(g.clone(), 0).unwrap();
        let b = DiscreteDistribution::point_mass(g.clone(), 1).unwrap();
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein1(&a, &b).unwrap(), 1.0);
        let p = DiscreteDistribution::new(vec![0.5, 0.5], g.clone()).unwrap();
        assert_eq!(wasserstein1(&p, &a).unwrap(), 0.5);
        assert_eq!(wasserstein1_transport(&p, &a, 16).unwrap(), 0.5);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let p = DiscreteDistribution::uniform(line(2, 0.0, 1.0));
        let q = DiscreteDistribution::uniform(line(2, 0.0, 2.0));
        assert_eq!(total_variation(&p, &q), Err(Error::GridMismatch));
        assert_eq!(wasserstein1(&p, &q), Err(Error::GridMismatch));
        let r = DiscreteDistribution::uniform(line(3, 0.0, 1.0));
        assert_eq!(wasserstein1(&p, &r), Err(Error::GridMismatch));
    }

    #[test]
    fn transport_cap_is_enforced() {
        let g = Arc::new(Grid::new(DomainBox::unit(2), 4).unwrap());
        let p = DiscreteDistribution::uniform(g.clone());
        let q = DiscreteDistribution::point_mass(g, 0).unwrap();
        assert!(matches!(wasserstein1_transport(&p, &q, 8), Err(Error::Size { cells: 16, cap: 8 })));
    }

    #[test]
    fn two_dimensional_point_masses() {
        let g = Arc::new(Grid::new(DomainBox::unit(2), 4).unwrap());
        let a = DiscreteDistribution::point_mass(g.clone(), g.cell_of(&[0.1, 0.1])).unwrap();
        let b = DiscreteDistribution::point_mass(g.clone(), g.cell_of(&[0.9, 0.6])).unwrap();
        // centers (0.125, 0.125) and (0.875, 0.625)
        let expected = libm::sqrt(0.75 * 0.75 + 0.5 * 0.5);
        assert!((wasserstein1(&a, &b).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn distribution_constructor_contract() {
        let g = line(3, 0.0, 1.0);
        assert!(DiscreteDistribution::new(vec![0.5, 0.6, -0.1], g.clone()).is_err());
        let near = DiscreteDistribution::new(vec![0.2, 0.3, 0.5 + 5e-10], g.clone()).unwrap();
        assert!((near.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(DiscreteDistribution::new(vec![0.2, 0.3, 0.5 + 1e-6], g.clone()).is_err());
        assert!(DiscreteDistribution::new(vec![0.5, 0.5], g).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = Grid::new(DomainBox::unit(2), 3).unwrap();
        assert_eq!(g.num_cells(), 9);
        assert_eq!(g.multi_index(5), vec![1, 2]);
        assert_eq!(g.cell_of(&[0.5, 0.9]), 5);
        assert_eq!(g.cell_of(&[1.0, 1.0]), 8);
        assert_eq!(g.cell_of(&[-3.0, 7.0]), 2);
        let c = g.center(5);
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 5.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            Grid::new(DomainBox::unit(3), 17),
            Err(Error::Size { cells: 4913, .. })
        ));
    }
}
