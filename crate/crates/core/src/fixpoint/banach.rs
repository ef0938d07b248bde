use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::FixedPointResult;
use crate::error::{Error, Result};
use crate::float::euclid;

/// Number of trailing step ratios used for the contraction estimate.
pub const CONTRACTION_WINDOW: usize = 10;

/// Residual growth (relative to the first residual) treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Picard iteration `x <- F(x)` until `|F(x) - x| < tol` (Euclidean norm).
pub fn banach_iterate<F>(mut f: F, x0: &[f64], tol: f64, max_iter: usize) -> Result<FixedPointResult>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let mut x = x0.to_vec();
    let mut fx = eval(&mut f, &x)?;
    let mut evaluations = 1;
    let mut residual = euclid(&fx, &x);
    let initial = residual;
    let mut ratios: VecDeque<f64> = VecDeque::with_capacity(CONTRACTION_WINDOW);
    let mut iterations = 0;

    loop {
        if residual < tol {
            let empirical_contraction = ratios.iter().copied().reduce(f64::max);
            return Ok(FixedPointResult {
                point: x,
                residual,
                iterations,
                empirical_contraction,
                evaluations,
            });
        }
        if iterations == max_iter {
            return Err(Error::NonConvergence {
                point: x,
                residual,
                iterations,
            });
        }
        x = fx;
        fx = eval(&mut f, &x)?;
        evaluations += 1;
        iterations += 1;
        let next = euclid(&fx, &x);
        if !next.is_finite() || next > DIVERGENCE_FACTOR * initial {
            return Err(Error::Divergence {
                point: x,
                residual: next,
                iterations,
            });
        }
        if residual > 0.0 {
            if ratios.len() == CONTRACTION_WINDOW {
                ratios.pop_front();
            }
            ratios.push_back(next / residual);
        }
        residual = next;
    }
}

fn eval<F: FnMut(&[f64]) -> Vec<f64>>(f: &mut F, x: &[f64]) -> Result<Vec<f64>> {
    let y = f(x);
    if y.len() != x.len() {
        return Err(Error::dim(x.len(), y.len()));
    }
    Ok(y)
}
