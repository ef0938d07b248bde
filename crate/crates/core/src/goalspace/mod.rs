//! Goals, metrics over goals (and over metrics), and distances between
//! discrete distributions on a goal-space grid.

mod distribution;
mod transport;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::{abs, pow, sqrt};

pub use distribution::{
    total_variation, wasserstein1, wasserstein1_cdf, wasserstein1_transport, DiscreteDistribution,
    Grid, DEFAULT_CELL_CAP,
};

/// Axis-aligned compact box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = DomainBox { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub(crate) fn from_bounds_unchecked(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        DomainBox { lo, hi }
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        DomainBox {
            lo: alloc::vec![0.0; dim],
            hi: alloc::vec![1.0; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_empty() {
            return Err(Error::invalid("domain must have at least one dimension"));
        }
        if self.lo.len() != self.hi.len() {
            return Err(Error::dim(self.lo.len(), self.hi.len()));
        }
        for (i, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !l.is_finite() || !h.is_finite() || l >= h {
                return Err(Error::Invalid(alloc::format!(
                    "domain axis {i}: need finite lo < hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        crate::float::euclid(&self.lo, &self.hi)
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - slack && *v <= h + slack)
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    pub fn clamp_in_place(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }
}

/// A point of goal space. Coordinates are clamped into the domain on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalVector {
    coords: Vec<f64>,
}

impl GoalVector {
    pub fn new(coords: Vec<f64>, domain: &DomainBox) -> Result<Self> {
        if coords.len() != domain.dim() {
            return Err(Error::dim(domain.dim(), coords.len()));
        }
        if coords.iter().any(|c| c.is_nan()) {
            return Err(Error::invalid("goal coordinate is NaN"));
        }
        Ok(GoalVector {
            coords: domain.clamp(&coords),
        })
    }

    /// Caller guarantees the coordinates already satisfy the enclosing domain
    /// (e.g. a convex combination of two in-domain goals).
    pub(crate) fn from_coords(coords: Vec<f64>) -> Self {
        GoalVector { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Weighted `l_p` metric. `exponent == f64::INFINITY` selects the weighted max-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    weights: Vec<f64>,
    exponent: f64,
}

impl MetricParams {
    pub fn new(weights: Vec<f64>, exponent: f64) -> Result<Self> {
        let m = MetricParams { weights, exponent };
        m.validate()?;
        Ok(m)
    }

    /// Rescales the weights so they sum to the dimension.
    pub fn normalized(weights: Vec<f64>, exponent: f64) -> Result<Self> {
        let m = MetricParams::new(weights, exponent)?;
        let n = m.weights.len() as f64;
        let total: f64 = m.weights.iter().sum();
        Ok(MetricParams {
            weights: m.weights.iter().map(|w| w * n / total).collect(),
            exponent: m.exponent,
        })
    }

    /// All-ones weights: the canonical metric of a given dimension.
    pub fn uniform(dim: usize, exponent: f64) -> Self {
        MetricParams {
            weights: alloc::vec![1.0; dim],
            exponent,
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::uniform(dim, 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::invalid("metric needs at least one weight"));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("metric weights must be finite and nonnegative"));
        }
        if !self.weights.iter().any(|w| *w > 0.0) {
            return Err(Error::invalid("metric needs a strictly positive weight"));
        }
        if self.exponent.is_nan() || self.exponent < 1.0 {
            return Err(Error::Invalid(alloc::format!(
                "metric exponent must lie in [1, inf], got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn is_max_norm(&self) -> bool {
        self.exponent == f64::INFINITY
    }

    /// Canonical metric of another dimension sharing this exponent.
    pub fn canonical(&self, dim: usize) -> Self {
        Self::uniform(dim, self.exponent)
    }

    /// This metric extended by a unit weight on one extra trailing
    /// coordinate, so it can measure flattened metric parameters.
    pub fn lifted(&self) -> Self {
        let mut weights = self.weights.clone();
        weights.push(1.0);
        MetricParams {
            weights,
            exponent: self.exponent,
        }
    }

    /// `weights ++ [1/p]`. The exponent is stored reciprocally so the
    /// max-norm sentinel maps to the finite value 0.
    pub fn flattened(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(1.0 / self.exponent);
        v
    }

    pub fn from_flattened(v: &[f64]) -> Result<Self> {
        let (last, weights) = v
            .split_last()
            .ok_or_else(|| Error::invalid("empty flattened metric"))?;
        if *last < 0.0 || *last > 1.0 {
            return Err(Error::invalid("reciprocal exponent must lie in [0, 1]"));
        }
        let exponent = if *last == 0.0 { f64::INFINITY } else { 1.0 / last };
        MetricParams::new(weights.to_vec(), exponent)
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != self.dim() {
            return Err(Error::dim(self.dim(), a.len()));
        }
        if b.len() != self.dim() {
            return Err(Error::dim(self.dim(), b.len()));
        }
        Ok(self.distance_unchecked(a, b))
    }

    pub(crate) fn distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let terms = self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| (*w, abs(x - y)));
        let p = self.exponent;
        if p == f64::INFINITY {
            terms.fold(0.0, |m, (w, d)| if w > 0.0 { m.max(w * d) } else { m })
        } else if p == 1.0 {
            terms.map(|(w, d)| w * d).sum()
        } else if p == 2.0 {
            sqrt(terms.map(|(w, d)| w * d * d).sum())
        } else {
            // scale by the largest gap to keep pow away from under/overflow
            let scale = self
                .weights
                .iter()
                .zip(a.iter().zip(b))
                .filter(|(w, _)| **w > 0.0)
                .fold(0.0f64, |m, (_, (x, y))| m.max(abs(x - y)));
            if scale == 0.0 {
                return 0.0;
            }
            let s: f64 = terms.map(|(w, d)| w * pow(d / scale, p)).sum();
            scale * pow(s, 1.0 / p)
        }
    }
}

/// Goals, metagoal numbers, metric and internal knobs of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub goals: GoalVector,
    pub metagoal_params: Vec<f64>,
    pub metric_params: MetricParams,
    pub internal_params: Vec<f64>,
}

impl AugmentedState {
    fn same_layout(&self, other: &Self) -> Result<()> {
        let pairs = [
            (self.goals.dim(), other.goals.dim()),
            (self.metagoal_params.len(), other.metagoal_params.len()),
            (self.metric_params.dim(), other.metric_params.dim()),
            (self.internal_params.len(), other.internal_params.len()),
        ];
        for (a, b) in pairs {
            if a != b {
                return Err(Error::dim(a, b));
            }
        }
        Ok(())
    }
}

pub fn goal_distance(a: &GoalVector, b: &GoalVector, m: &MetricParams) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dim(a.dim(), b.dim()));
    }
    m.distance(a.coords(), b.coords())
}

/// `base` applied to the flattened parameter vectors of two metrics.
pub fn metric_distance(m1: &MetricParams, m2: &MetricParams, base: &MetricParams) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(Error::dim(m1.dim(), m2.dim()));
    }
    base.distance(&m1.flattened(), &m2.flattened())
}

/// The fixed analysis super-metric: component sum of goal, metagoal and
/// metric distances. Goals use `base`; the other components use the
/// canonical metric of their own dimension with `base`'s exponent.
pub fn augmented_distance(s1: &AugmentedState, s2: &AugmentedState, base: &MetricParams) -> Result<f64> {
    s1.same_layout(s2)?;
    let goals = goal_distance(&s1.goals, &s2.goals, base)?;
    let meta = if s1.metagoal_params.is_empty() {
        0.0
    } else {
        base.canonical(s1.metagoal_params.len())
            .distance(&s1.metagoal_params, &s2.metagoal_params)?
    };
    let metric = metric_distance(
        &s1.metric_params,
        &s2.metric_params,
        &base.canonical(s1.metric_params.dim() + 1),
    )?;
    Ok(goals + meta + metric)
}
