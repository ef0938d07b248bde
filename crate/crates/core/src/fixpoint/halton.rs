//! Halton low-discrepancy points.

use alloc::vec::Vec;

use crate::goalspace::DomainBox;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

pub const MAX_DIM: usize = PRIMES.len();

pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// Point `index` of the Halton sequence in `[0,1)^dim`. Index 0 is the
/// origin, so callers usually start at 1.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= MAX_DIM, "halton sequence supports up to {MAX_DIM} dimensions");
    PRIMES[..dim].iter().map(|&b| radical_inverse(index, b)).collect()
}

/// The first `count` points (indices 1..=count) scaled into `domain`.
pub fn halton_points(domain: &DomainBox, count: usize) -> Vec<Vec<f64>> {
    (1..=count as u64)
        .map(|i| {
            halton(i, domain.dim())
                .into_iter()
                .enumerate()
                .map(|(a, u)| domain.lo()[a] + u * domain.width(a))
                .collect()
        })
        .collect()
}
