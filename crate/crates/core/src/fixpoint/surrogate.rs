//! Surrogate-guided fixed-point search.
//!
//! An interpolating kernel model of the map ranks blocks of the domain;
//! candidates found on the model are only accepted after a true evaluation.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::halton::{halton, halton_points, MAX_DIM};
use super::FixedPointResult;
use crate::error::{Error, Result};
use crate::float::{euclid, median, sqrt};
use crate::goalspace::DomainBox;

const RANGE_SLACK: f64 = 1e-9;
const FIT_TOLERANCE: f64 = 1e-9;
const NUGGETS: [f64; 4] = [1e-12, 1e-10, 1e-8, 1e-6];

/// Inverse-multiquadric interpolant with a low-order polynomial tail.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    centers: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    weights: DMatrix<f64>,
    tail: DMatrix<f64>,
    bandwidth: f64,
    slopes: Vec<f64>,
}

impl SurrogateModel {
    /// Fits `(input, output)` pairs. Repeated inputs are merged by averaging
    /// their outputs; an ill-posed system is retried with a smaller tail and
    /// then with growing diagonal jitter.
    pub fn fit(samples: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let (centers, outputs, bandwidth) = prepare(samples)?;
        let (m, din) = (centers.len(), centers[0].len());
        let mut tails = Vec::new();
        if m > din {
            tails.push(din + 1);
        }
        tails.push(1);
        let attempts = tails
            .iter()
            .map(|t| (*t, 0.0))
            .chain(NUGGETS.iter().map(|nug| (1, *nug)));
        for (q, nugget) in attempts {
            if let Some((weights, tail)) = solve(&centers, &outputs, bandwidth, q, nugget) {
                let model = SurrogateModel {
                    slopes: Vec::new(),
                    centers: centers.clone(),
                    outputs: outputs.clone(),
                    weights,
                    tail,
                    bandwidth,
                };
                let tol = if nugget == 0.0 { FIT_TOLERANCE } else { 1e3 * nugget.max(FIT_TOLERANCE) };
                if model.max_fit_error() <= tol * (1.0 + model.output_scale()) {
                    return Ok(model.with_slopes());
                }
            }
        }
        Err(Error::Surrogate("interpolation system is singular".into()))
    }

    /// Regularized fit for noisy targets: `smoothing` is added to the kernel
    /// diagonal, so predictions no longer reproduce the samples exactly.
    /// `smoothing = 0` is the interpolating [`fit`](Self::fit).
    pub fn fit_smoothed(samples: &[(Vec<f64>, Vec<f64>)], smoothing: f64) -> Result<Self> {
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::invalid("smoothing must be finite and non-negative"));
        }
        if smoothing == 0.0 {
            return Self::fit(samples);
        }
        let (centers, outputs, bandwidth) = prepare(samples)?;
        let din = centers[0].len();
        let tails: &[usize] = if centers.len() > din { &[din + 1, 1] } else { &[1] };
        for q in tails {
            if let Some((weights, tail)) = solve(&centers, &outputs, bandwidth, *q, smoothing) {
                let model = SurrogateModel {
                    slopes: Vec::new(),
                    centers,
                    outputs,
                    weights,
                    tail,
                    bandwidth,
                };
                return Ok(model.with_slopes());
            }
        }
        Err(Error::Surrogate("smoothed system is singular".into()))
    }

    fn max_fit_error(&self) -> f64 {
        self.centers
            .iter()
            .zip(&self.outputs)
            .map(|(x, y)| euclid(&self.predict(x), y))
            .fold(0.0, f64::max)
    }

    fn output_scale(&self) -> f64 {
        self.outputs
            .iter()
            .flat_map(|y| y.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }

    fn with_slopes(mut self) -> Self {
        let m = self.centers.len();
        self.slopes = (0..m)
            .map(|k| {
                let nearest = (0..m)
                    .filter(|j| *j != k)
                    .min_by(|a, b| {
                        euclid(&self.centers[k], &self.centers[*a]).total_cmp(&euclid(&self.centers[k], &self.centers[*b]))
                    });
                match nearest {
                    Some(j) => euclid(&self.outputs[k], &self.outputs[j]) / euclid(&self.centers[k], &self.centers[j]),
                    None => 1.0,
                }
            })
            .collect();
        self
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Distinct inputs after merging duplicates.
    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let dout = self.weights.ncols();
        let mut out = alloc::vec![0.0; dout];
        for (k, c) in self.centers.iter().enumerate() {
            let phi = imq(euclid(x, c), self.bandwidth);
            for (d, o) in out.iter_mut().enumerate() {
                *o += phi * self.weights[(k, d)];
            }
        }
        for (d, o) in out.iter_mut().enumerate() {
            *o += self.tail[(0, d)];
            for r in 1..self.tail.nrows() {
                *o += self.tail[(r, d)] * x[r - 1];
            }
        }
        out
    }

    /// Distance to the nearest sample scaled by the output variation around it.
    pub fn uncertainty(&self, x: &[f64]) -> f64 {
        let (k, d) = self
            .centers
            .iter()
            .enumerate()
            .map(|(k, c)| (k, euclid(x, c)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        d * self.slopes.get(k).copied().unwrap_or(1.0)
    }

    /// Predicted self-displacement `|f(x) - x|`.
    pub fn predicted_residual(&self, x: &[f64]) -> f64 {
        euclid(&self.predict(x), x)
    }
}

fn imq(r: f64, h: f64) -> f64 {
    let t = r / h;
    1.0 / sqrt(1.0 + t * t)
}

fn merge_duplicates(samples: &[(Vec<f64>, Vec<f64>)]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<(Vec<f64>, usize)> = Vec::new();
    for (x, y) in samples {
        match centers.iter().position(|c| c == x) {
            Some(k) => {
                sums[k].0.iter_mut().zip(y).for_each(|(s, v)| *s += v);
                sums[k].1 += 1;
            }
            None => {
                centers.push(x.clone());
                sums.push((y.clone(), 1));
            }
        }
    }
    let outputs = sums
        .into_iter()
        .map(|(s, n)| s.into_iter().map(|v| v / n as f64).collect())
        .collect();
    (centers, outputs)
}

type Prepared = (Vec<Vec<f64>>, Vec<Vec<f64>>, f64);

/// Merged centers and outputs plus the median pairwise-distance bandwidth.
fn prepare(samples: &[(Vec<f64>, Vec<f64>)]) -> Result<Prepared> {
    let (first_x, first_y) = samples.first().ok_or_else(|| Error::Surrogate("no samples".into()))?;
    let (din, dout) = (first_x.len(), first_y.len());
    if samples.iter().any(|(x, y)| x.len() != din || y.len() != dout) {
        return Err(Error::Surrogate("samples have inconsistent dimensions".into()));
    }
    let (centers, outputs) = merge_duplicates(samples);
    let m = centers.len();

    let mut pairwise = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            pairwise.push(euclid(&centers[i], &centers[j]));
        }
    }
    let bandwidth = match median(&mut pairwise) {
        h if h > 0.0 => h,
        _ => 1.0,
    };
    Ok((centers, outputs, bandwidth))
}

fn solve(
    centers: &[Vec<f64>],
    outputs: &[Vec<f64>],
    h: f64,
    q: usize,
    nugget: f64,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let m = centers.len();
    let dout = outputs[0].len();
    let size = m + q;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut b = DMatrix::<f64>::zeros(size, dout);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = imq(euclid(&centers[i], &centers[j]), h);
        }
        a[(i, i)] += nugget;
        for r in 0..q {
            let p = if r == 0 { 1.0 } else { centers[i][r - 1] };
            a[(i, m + r)] = p;
            a[(m + r, i)] = p;
        }
        for d in 0..dout {
            b[(i, d)] = outputs[i][d];
        }
    }
    let sol = a.lu().solve(&b)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, m).into_owned(), sol.rows(m, q).into_owned()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSearchConfig {
    pub initial_samples: usize,
    pub top_k: usize,
    pub explore_weight: f64,
    pub local_iters: usize,
    /// Total true-map evaluations allowed.
    pub budget: usize,
    /// Offset into the low-discrepancy sequence.
    pub seed: u64,
}

impl Default for SurrogateSearchConfig {
    fn default() -> Self {
        SurrogateSearchConfig {
            initial_samples: 10,
            top_k: 3,
            explore_weight: 0.5,
            local_iters: 50,
            budget: 100_000,
            seed: 0,
        }
    }
}

/// A block of the domain with the model's view of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBlock {
    pub bounds: DomainBox,
    pub predicted_g: f64,
    pub uncertainty: f64,
    pub depth: usize,
}

impl SearchBlock {
    fn score(&self, explore_weight: f64) -> f64 {
        self.predicted_g - explore_weight * self.uncertainty
    }

    fn representatives(&self) -> Vec<Vec<f64>> {
        let b = &self.bounds;
        let n = b.dim();
        let mut reps = alloc::vec![b.center()];
        for mask in 0..(1u32 << n) {
            reps.push((0..n).map(|a| if mask >> a & 1 == 1 { b.hi()[a] } else { b.lo()[a] }).collect());
        }
        reps
    }

    fn children(&self) -> Vec<SearchBlock> {
        let b = &self.bounds;
        let n = b.dim();
        let mid = b.center();
        (0..(1u32 << n))
            .map(|mask| {
                let (lo, hi) = (0..n)
                    .map(|a| if mask >> a & 1 == 1 { (mid[a], b.hi()[a]) } else { (b.lo()[a], mid[a]) })
                    .unzip();
                SearchBlock {
                    bounds: DomainBox::from_bounds_unchecked(lo, hi),
                    predicted_g: f64::INFINITY,
                    uncertainty: 0.0,
                    depth: self.depth + 1,
                }
            })
            .collect()
    }
}

/// One model-guided round: what the model predicted and what the map said.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub candidate: Vec<f64>,
    pub predicted_g: f64,
    pub true_residual: f64,
    pub samples_before: usize,
    pub samples_after: usize,
    pub accepted: bool,
}

/// Stepwise driver; [`surrogate_guided_search`] runs it to completion.
pub struct SurrogateSearch<F> {
    f: F,
    domain: DomainBox,
    epsilon: f64,
    cfg: SurrogateSearchConfig,
    samples: Vec<(Vec<f64>, Vec<f64>)>,
    leaves: Vec<SearchBlock>,
    evaluations: usize,
    rounds: usize,
    trace: Vec<RoundTrace>,
    best: Option<(Vec<f64>, f64)>,
    fallback_index: u64,
}

impl<F: FnMut(&[f64]) -> Vec<f64>> SurrogateSearch<F> {
    /// Validates the setup and evaluates the initial low-discrepancy samples.
    pub fn new(f: F, domain: &DomainBox, epsilon: f64, cfg: SurrogateSearchConfig) -> Result<Self> {
        domain.validate()?;
        let n = domain.dim();
        if n > MAX_DIM.min(super::MAX_SEARCH_DIM) {
            return Err(Error::Invalid(alloc::format!("surrogate search supports at most {} dimensions", super::MAX_SEARCH_DIM)));
        }
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if cfg.initial_samples < n + 1 {
            return Err(Error::Invalid(alloc::format!("need at least {} initial samples", n + 1)));
        }
        if cfg.top_k == 0 || !(cfg.explore_weight >= 0.0) {
            return Err(Error::invalid("top_k must be positive and explore_weight nonnegative"));
        }
        if cfg.budget <= cfg.initial_samples {
            return Err(Error::invalid("budget must exceed the initial sample count"));
        }
        let mut search = SurrogateSearch {
            f,
            domain: domain.clone(),
            epsilon,
            leaves: alloc::vec![SearchBlock {
                bounds: domain.clone(),
                predicted_g: f64::INFINITY,
                uncertainty: 0.0,
                depth: 0,
            }],
            samples: Vec::with_capacity(cfg.initial_samples),
            evaluations: 0,
            rounds: 0,
            trace: Vec::new(),
            best: None,
            fallback_index: 1,
            cfg,
        };
        let offset = search.cfg.seed as usize;
        let points = halton_points(domain, offset + search.cfg.initial_samples);
        for x in points.into_iter().skip(offset) {
            let (y, _) = search.evaluate(&x)?;
            search.samples.push((x, y));
        }
        Ok(search)
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let y = (self.f)(x);
        self.evaluations += 1;
        if y.len() != x.len() {
            return Err(Error::dim(x.len(), y.len()));
        }
        if !self.domain.contains(&y, RANGE_SLACK * self.domain.diameter()) {
            return Err(Error::Range(alloc::format!("map sends {x:?} outside the domain")));
        }
        let r = euclid(&y, x);
        if self.best.as_ref().is_none_or(|(_, b)| r < *b) {
            self.best = Some((x.to_vec(), r));
        }
        Ok((y, r))
    }

    pub fn samples(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.samples
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn trace(&self) -> &[RoundTrace] {
        &self.trace
    }

    pub fn leaves(&self) -> &[SearchBlock] {
        &self.leaves
    }

    fn exhausted(&self) -> Error {
        let (best, residual) = self.best.clone().unwrap_or_default();
        Error::BudgetExhausted {
            best,
            residual,
            evaluations: self.evaluations,
        }
    }

    fn score_block(&self, block: &mut SearchBlock, model: &SurrogateModel) {
        let w = self.cfg.explore_weight;
        let (g, u) = block
            .representatives()
            .iter()
            .map(|p| (model.predicted_residual(p), model.uncertainty(p)))
            .min_by(|a, b| (a.0 - w * a.1).total_cmp(&(b.0 - w * b.1)))
            .unwrap_or((f64::INFINITY, 0.0));
        block.predicted_g = g;
        block.uncertainty = u;
    }

    /// Runs one round. Returns the verified result once a candidate passes.
    pub fn step(&mut self) -> Result<Option<FixedPointResult>> {
        if self.evaluations >= self.cfg.budget {
            return Err(self.exhausted());
        }
        let model = SurrogateModel::fit(&self.samples)?;
        let w = self.cfg.explore_weight;

        let mut leaves = core::mem::take(&mut self.leaves);
        for b in leaves.iter_mut() {
            self.score_block(b, &model);
        }
        let mut order: Vec<usize> = (0..leaves.len()).collect();
        order.sort_by(|&a, &b| {
            leaves[a]
                .score(w)
                .total_cmp(&leaves[b].score(w))
                .then(leaves[a].depth.cmp(&leaves[b].depth))
                .then(a.cmp(&b))
        });
        let min_width = 1e-12 * self.domain.diameter();
        let refine: Vec<usize> = order
            .into_iter()
            .filter(|&i| (0..self.domain.dim()).all(|a| leaves[i].bounds.width(a) > min_width))
            .take(self.cfg.top_k)
            .collect();
        let mut next = Vec::with_capacity((leaves.len() + refine.len()) << self.domain.dim());
        for (i, b) in leaves.into_iter().enumerate() {
            if refine.contains(&i) {
                for mut c in b.children() {
                    self.score_block(&mut c, &model);
                    next.push(c);
                }
            } else {
                next.push(b);
            }
        }
        self.leaves = next;

        let best_block = self
            .leaves
            .iter()
            .min_by(|a, b| a.score(w).total_cmp(&b.score(w)).then(a.depth.cmp(&b.depth)))
            .cloned()
            .ok_or_else(|| Error::Surrogate("no blocks left".into()))?;

        let mut candidate = self.local_minimum(&model, &best_block);
        if self.samples.iter().any(|(x, _)| euclid(x, &candidate) <= min_width) {
            candidate = self.fresh_point(&best_block.bounds);
        }
        let predicted_g = model.predicted_residual(&candidate);

        let samples_before = self.samples.len();
        let (y, residual) = self.evaluate(&candidate)?;
        self.rounds += 1;
        let accepted = residual < self.epsilon;
        if !accepted {
            self.samples.push((candidate.clone(), y));
        }
        self.trace.push(RoundTrace {
            round: self.rounds,
            candidate: candidate.clone(),
            predicted_g,
            true_residual: residual,
            samples_before,
            samples_after: self.samples.len(),
            accepted,
        });
        Ok(accepted.then_some(FixedPointResult {
            point: candidate,
            residual,
            iterations: self.rounds,
            empirical_contraction: None,
            evaluations: self.evaluations,
        }))
    }

    /// Coordinate descent on the predicted residual inside `block`, started
    /// from the best representative or sample in it.
    fn local_minimum(&self, model: &SurrogateModel, block: &SearchBlock) -> Vec<f64> {
        let b = &block.bounds;
        let n = b.dim();
        let starts = block
            .representatives()
            .into_iter()
            .chain(self.samples.iter().map(|(x, _)| x.clone()).filter(|x| b.contains(x, 0.0)));
        let (mut x, mut gx) = starts
            .map(|p| {
                let g = model.predicted_residual(&p);
                (p, g)
            })
            .min_by(|a, c| a.1.total_cmp(&c.1))
            .unwrap_or_else(|| (b.center(), f64::INFINITY));
        let mut steps: Vec<f64> = (0..n).map(|a| 0.25 * b.width(a)).collect();
        for _ in 0..self.cfg.local_iters {
            let mut improved = false;
            for a in 0..n {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[a] = (y[a] + dir * steps[a]).clamp(b.lo()[a], b.hi()[a]);
                    let gy = model.predicted_residual(&y);
                    if gy < gx {
                        x = y;
                        gx = gy;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                steps.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
        x
    }

    fn fresh_point(&mut self, bounds: &DomainBox) -> Vec<f64> {
        let u = halton(self.fallback_index, bounds.dim());
        self.fallback_index += 1;
        u.iter()
            .enumerate()
            .map(|(a, t)| bounds.lo()[a] + t * bounds.width(a))
            .collect()
    }

    pub fn run(&mut self) -> Result<FixedPointResult> {
        loop {
            if let Some(r) = self.step()? {
                return Ok(r);
            }
        }
    }
}

pub fn surrogate_guided_search<F>(
    f: F,
    domain: &DomainBox,
    epsilon: f64,
    cfg: &SurrogateSearchConfig,
) -> Result<FixedPointResult>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    SurrogateSearch::new(f, domain, epsilon, cfg.clone())?.run()
}
