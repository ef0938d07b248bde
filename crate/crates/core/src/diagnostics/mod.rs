//! Post-hoc analysis of trajectories: residual series, contraction
//! estimates, tremor plateau and the self-model accuracy proxy.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixpoint::{ContractionMetric, SurrogateModel};
use crate::float::{euclid, median};
use crate::goalspace::DiscreteDistribution;
use crate::rng::{self, purpose};
use crate::simulator::{step_interval, Realizer, ScenarioConfig, TrajectoryRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `d(R(t+M), R(t))` per interval.
    pub residual_series: Vec<f64>,
    /// `r_i / r_{i-1}`; absent for the first interval and zero denominators.
    pub empirical_c_series: Vec<Option<f64>>,
    /// Median residual over the last quarter.
    pub plateau_level: f64,
    /// First interval after which every residual stays within twice the plateau.
    pub plateau_onset: usize,
    /// Fraction of intervals whose active metagoal check failed.
    pub condition_violation_rate: f64,
}

impl ConvergenceReport {
    pub fn from_residuals(residuals: Vec<f64>, checks: &[Option<bool>]) -> Result<Self> {
        let k = residuals.len();
        if k < 4 {
            return Err(Error::History { needed: 4, available: k });
        }
        let empirical_c_series = (0..k)
            .map(|i| (i > 0 && residuals[i - 1] > 0.0).then(|| residuals[i] / residuals[i - 1]))
            .collect();
        let mut tail = residuals[k - k / 4..].to_vec();
        let plateau_level = median(&mut tail);
        let bound = 2.0 * plateau_level;
        let plateau_onset = residuals.iter().rposition(|r| *r > bound).map_or(0, |i| i + 1);
        let failed = checks.iter().filter(|c| **c == Some(false)).count();
        Ok(ConvergenceReport {
            residual_series: residuals,
            empirical_c_series,
            plateau_level,
            plateau_onset,
            condition_violation_rate: failed as f64 / k as f64,
        })
    }

    /// Mean of the defined contraction ratios.
    pub fn mean_empirical_c(&self) -> Option<f64> {
        let v: Vec<f64> = self.empirical_c_series.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub fn analyze(traj: &TrajectoryRecord, metric: ContractionMetric) -> Result<ConvergenceReport> {
    let residuals = match metric {
        ContractionMetric::Tv => traj.residuals_tv(),
        ContractionMetric::W1 => traj.residuals_w1(),
    };
    let checks: Vec<Option<bool>> = traj.intervals.iter().map(|m| m.check).collect();
    ConvergenceReport::from_residuals(residuals, &checks)
}

/// Mean of `W1(F x, F y) / W1(x, y)` over seeded pairs of distributions on
/// the scenario grid (alternating Dirichlet draws and distinct point masses).
pub fn expected_contraction_experiment(cfg: &ScenarioConfig, num_state_pairs: usize, seed: u64) -> Result<f64> {
    let ratios = contraction_ratios(cfg, num_state_pairs, seed, ContractionMetric::W1)?;
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Per-pair ratios `d(F x, F y) / d(x, y)` behind
/// [`expected_contraction_experiment`]; degenerate pairs are skipped.
pub fn contraction_ratios(
    cfg: &ScenarioConfig,
    num_state_pairs: usize,
    seed: u64,
    metric: ContractionMetric,
) -> Result<Vec<f64>> {
    if num_state_pairs == 0 {
        return Err(Error::invalid("num_state_pairs must be at least 1"));
    }
    let mut realizer = Realizer::new(cfg, cfg.estimation.samples_per_cell, seed)?;
    let grid = realizer.grid().clone();
    let n = grid.num_cells();
    let mut r = rng::stream(seed, purpose::PAIRS, 0);
    let mut ratios = Vec::with_capacity(num_state_pairs);
    for k in 0..num_state_pairs {
        let (x, y) = if k % 2 == 0 {
            let mut draw = || {
                let w: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut r)).collect();
                DiscreteDistribution::from_weights(w, grid.clone())
            };
            (draw()?, draw()?)
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
        let d0 = metric.distance(&x, &y)?;
        if d0 <= 1e-300 {
            continue;
        }
        let d1 = metric.distance(&realizer.apply(&x)?, &realizer.apply(&y)?)?;
        ratios.push(d1 / d0);
    }
    if ratios.is_empty() {
        return Err(Error::Sampling);
    }
    Ok(ratios)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfModelOptions {
    /// Standard deviation of the goal jitter applied to probe states.
    pub probe_jitter: f64,
    /// True rollouts averaged per probe.
    pub rollouts: usize,
    /// Diagonal regularization of the self-model; 0 interpolates exactly.
    pub smoothing: f64,
    /// Train on outputs permuted across transitions (a control).
    pub shuffle_labels: bool,
}

impl Default for SelfModelOptions {
    fn default() -> Self {
        SelfModelOptions {
            probe_jitter: 0.02,
            rollouts: 4,
            smoothing: 0.1,
            shuffle_labels: false,
        }
    }
}

/// Normalized error of the agent's interval self-model. Only defined for
/// trajectories run under a global-search variant.
pub fn self_model_accuracy(cfg: &ScenarioConfig, traj: &TrajectoryRecord, probe_states: usize, seed: u64) -> Result<f64> {
    if !cfg.metagoal.variant.is_global() {
        return Err(Error::Mode(cfg.metagoal.variant.name().into()));
    }
    self_model_error(cfg, traj, probe_states, seed, &SelfModelOptions::default())
}

/// Mean distance, over jittered probe states taken from the trajectory,
/// between the surrogate's predicted next-interval goals and the mean of
/// true rollouts, divided by the domain diameter. Any variant is accepted.
pub fn self_model_error(
    cfg: &ScenarioConfig,
    traj: &TrajectoryRecord,
    probe_states: usize,
    seed: u64,
    opts: &SelfModelOptions,
) -> Result<f64> {
    if probe_states == 0 || opts.rollouts == 0 {
        return Err(Error::invalid("probe_states and rollouts must be at least 1"));
    }
    let per = traj.steps_per_interval;
    let intervals = traj.intervals.len();
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..intervals)
        .map(|i| {
            (
                traj.snapshots[i * per].1.goals.coords().to_vec(),
                traj.snapshots[(i + 1) * per].1.goals.coords().to_vec(),
            )
        })
        .collect();
    if pairs.is_empty() {
        return Ok(1.0);
    }
    let mut r = rng::stream(seed, purpose::PROBE, 0);
    if opts.shuffle_labels {
        let mut outputs: Vec<Vec<f64>> = pairs.iter().map(|p| p.1.clone()).collect();
        outputs.shuffle(&mut r);
        pairs.iter_mut().zip(outputs).for_each(|(p, o)| p.1 = o);
    }
    let model = SurrogateModel::fit_smoothed(&pairs, opts.smoothing)?;
    let diameter = cfg.domain.diameter();
    let mut total = 0.0;
    for p in 0..probe_states {
        let i = r.random_range(0..intervals);
        let base = traj.agent_at_interval(cfg, i)?;
        let mut goals: Vec<f64> = base
            .goals()
            .iter()
            .map(|g| g + opts.probe_jitter * r.sample::<f64, _>(StandardNormal))
            .collect();
        cfg.domain.clamp_in_place(&mut goals);
        let probe = base.translated_to(&goals);
        let mut mean = alloc::vec![0.0; goals.len()];
        for k in 0..opts.rollouts {
            let mut a = probe.clone();
            let mut s = rng::stream(rng::derive(seed, purpose::PROBE, p as u64), purpose::MAIN, k as u64);
            for _ in 0..per {
                step_interval(&mut a, cfg, &mut s)?;
            }
            mean.iter_mut().zip(a.goals()).for_each(|(m, g)| *m += g / opts.rollouts as f64);
        }
        total += euclid(&model.predict(&goals), &mean) / diameter;
    }
    Ok(total / probe_states as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constructed_series() {
        let r = vec![8.0, 4.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let rep = ConvergenceReport::from_residuals(r, &[None; 8]).unwrap();
        assert_eq!(rep.plateau_level, 1.0);
        assert_eq!(rep.empirical_c_series[1], Some(0.5));
        assert_eq!(rep.empirical_c_series[0], None);
        assert_eq!(rep.plateau_onset, 2);
        assert_eq!(rep.condition_violation_rate, 0.0);
    }

    #[test]
    fn zero_series() {
        let rep = ConvergenceReport::from_residuals(vec![0.0; 6], &[Some(true); 6]).unwrap();
        assert_eq!(rep.plateau_level, 0.0);
        assert_eq!(rep.plateau_onset, 0);
        assert!(rep.empirical_c_series.iter().all(Option::is_none));
    }

    #[test]
    fn violation_rate_and_length_checks() {
        let checks = [Some(false), None, Some(true), Some(false)];
        let rep = ConvergenceReport::from_residuals(vec![1.0; 4], &checks).unwrap();
        assert_eq!(rep.condition_violation_rate, 0.5);
        assert!(matches!(
            ConvergenceReport::from_residuals(vec![1.0; 3], &[None; 3]),
            Err(Error::History { needed: 4, available: 3 })
        ));
    }
}
