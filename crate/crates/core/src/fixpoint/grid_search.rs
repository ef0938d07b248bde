//! Constructive search for an approximate fixed point by repeated
//! subdivision of the domain.
//!
//! Vertices live on a dyadic lattice with integer coordinates, so shared
//! corners of neighbouring blocks are evaluated once.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::FixedPointResult;
use crate::error::{Error, Result};
use crate::float::{euclid, sqrt};
use crate::goalspace::DomainBox;

/// Blocks per axis before the first subdivision.
pub const INITIAL_DIVISIONS: u64 = 4;

/// Subdivision splits every axis, so block count grows as `2^n`.
pub const MAX_SEARCH_DIM: usize = 6;

const LATTICE_BITS: u32 = 40;
const RANGE_SLACK: f64 = 1e-9;

struct Vertex {
    residual: f64,
    displacement: Vec<f64>,
}

struct Leaf {
    score: f64,
    depth: u32,
    seq: u64,
    lo: Vec<u64>,
    side: u64,
}

impl PartialEq for Leaf {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Leaf {}
impl PartialOrd for Leaf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Leaf {
    // max-heap: lower score first, then larger block, then older
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(other.depth.cmp(&self.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Search<'a, F> {
    f: F,
    domain: &'a DomainBox,
    epsilon: f64,
    budget: usize,
    cache: BTreeMap<Vec<u64>, Vertex>,
    evaluations: usize,
    best: Option<(Vec<f64>, f64)>,
}

enum Probe {
    Found(FixedPointResult),
    Continue,
}

impl<F: FnMut(&[f64]) -> Vec<f64>> Search<'_, F> {
    fn point(&self, key: &[u64]) -> Vec<f64> {
        let scale = (1u64 << LATTICE_BITS) as f64;
        key.iter()
            .enumerate()
            .map(|(a, k)| {
                if *k == 1 << LATTICE_BITS {
                    self.domain.hi()[a]
                } else {
                    self.domain.lo()[a] + (*k as f64 / scale) * self.domain.width(a)
                }
            })
            .collect()
    }

    fn visit(&mut self, key: Vec<u64>, iterations: usize) -> Result<Probe> {
        if self.cache.contains_key(&key) {
            return Ok(Probe::Continue);
        }
        if self.evaluations >= self.budget {
            return Err(self.exhausted());
        }
        let x = self.point(&key);
        let y = (self.f)(&x);
        self.evaluations += 1;
        if y.len() != x.len() {
            return Err(Error::dim(x.len(), y.len()));
        }
        if !self.domain.contains(&y, RANGE_SLACK * self.domain.diameter()) {
            return Err(Error::Range(alloc::format!("map sends {x:?} outside the domain")));
        }
        let residual = euclid(&y, &x);
        let displacement: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        if self.best.as_ref().is_none_or(|(_, r)| residual < *r) {
            self.best = Some((x.clone(), residual));
        }
        self.cache.insert(key, Vertex { residual, displacement });
        if residual < self.epsilon {
            return Ok(Probe::Found(FixedPointResult {
                point: x,
                residual,
                iterations,
                empirical_contraction: None,
                evaluations: self.evaluations,
            }));
        }
        Ok(Probe::Continue)
    }

    fn exhausted(&self) -> Error {
        let (best, residual) = self.best.clone().unwrap_or_default();
        Error::BudgetExhausted {
            best,
            residual,
            evaluations: self.evaluations,
        }
    }

    /// Visits the `(steps+1)^n` lattice points of a block, in row-major order.
    fn visit_block(&mut self, lo: &[u64], side: u64, steps: u64, iterations: usize) -> Result<Option<FixedPointResult>> {
        let n = lo.len();
        let h = side / steps;
        let mut idx = alloc::vec![0u64; n];
        loop {
            let key: Vec<u64> = lo.iter().zip(&idx).map(|(l, i)| l + i * h).collect();
            if let Probe::Found(r) = self.visit(key, iterations)? {
                return Ok(Some(r));
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    return Ok(None);
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] <= steps {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    /// Minimum corner residual, plus a penalty of the block diameter times
    /// the fraction of axes whose displacement keeps one sign at every corner.
    fn score(&self, lo: &[u64], side: u64) -> f64 {
        let n = lo.len();
        let mut min_res = f64::INFINITY;
        let mut pos = alloc::vec![false; n];
        let mut neg = alloc::vec![false; n];
        for mask in 0..(1u32 << n) {
            let key: Vec<u64> = (0..n).map(|a| lo[a] + if mask >> a & 1 == 1 { side } else { 0 }).collect();
            let v = &self.cache[&key];
            min_res = min_res.min(v.residual);
            for (a, d) in v.displacement.iter().enumerate() {
                pos[a] |= *d >= 0.0;
                neg[a] |= *d <= 0.0;
            }
        }
        let one_sided = pos.iter().zip(&neg).filter(|(p, q)| !(**p && **q)).count();
        let frac = side as f64 / (1u64 << LATTICE_BITS) as f64;
        let diam = sqrt((0..n).map(|a| { let w = frac * self.domain.width(a); w * w }).sum());
        min_res + diam * one_sided as f64 / n as f64
    }
}

/// Evaluates the map on a `5^n` vertex grid, then repeatedly bisects the
/// most promising block, returning the first vertex whose residual is
/// below `epsilon`.
pub fn grid_fixed_point_search<F>(f: F, domain: &DomainBox, epsilon: f64, budget: usize) -> Result<FixedPointResult>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    domain.validate()?;
    let n = domain.dim();
    if n > MAX_SEARCH_DIM {
        return Err(Error::Invalid(alloc::format!("grid search supports at most {MAX_SEARCH_DIM} dimensions")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let initial_vertices = (INITIAL_DIVISIONS + 1).pow(n as u32) as usize;
    if budget < initial_vertices {
        return Err(Error::Invalid(alloc::format!(
            "budget {budget} is below the {initial_vertices} initial vertices"
        )));
    }
    let mut s = Search {
        f,
        domain,
        epsilon,
        budget,
        cache: BTreeMap::new(),
        evaluations: 0,
        best: None,
    };
    let full = 1u64 << LATTICE_BITS;
    let root = alloc::vec![0u64; n];
    if let Some(r) = s.visit_block(&root, full, INITIAL_DIVISIONS, 0)? {
        return Ok(r);
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let side0 = full / INITIAL_DIVISIONS;
    let mut idx = alloc::vec![0u64; n];
    'blocks: loop {
        let lo: Vec<u64> = idx.iter().map(|i| i * side0).collect();
        heap.push(Leaf {
            score: s.score(&lo, side0),
            depth: 0,
            seq,
            lo,
            side: side0,
        });
        seq += 1;
        let mut axis = n;
        loop {
            if axis == 0 {
                break 'blocks;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < INITIAL_DIVISIONS {
                break;
            }
            idx[axis] = 0;
        }
    }

    let mut iterations = 0;
    while let Some(leaf) = heap.pop() {
        if leaf.side < 2 {
            continue;
        }
        iterations += 1;
        if let Some(r) = s.visit_block(&leaf.lo, leaf.side, 2, iterations)? {
            return Ok(r);
        }
        let half = leaf.side / 2;
        for mask in 0..(1u32 << n) {
            let lo: Vec<u64> = (0..n).map(|a| leaf.lo[a] + if mask >> a & 1 == 1 { half } else { 0 }).collect();
            heap.push(Leaf {
                score: s.score(&lo, half),
                depth: leaf.depth + 1,
                seq,
                lo,
                side: half,
            });
            seq += 1;
        }
    }
    Err(s.exhausted())
}
