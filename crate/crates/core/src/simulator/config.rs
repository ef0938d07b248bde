use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::objective::Objective;
use crate::error::{Error, Result};
use crate::goalspace::{DomainBox, Grid, MetricParams, DEFAULT_CELL_CAP};
use crate::metagoal::{FeasibilityFlags, MetaGoalSpec};

/// How the agent proposes changes to itself each N-step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Proposal {
    /// No self-modification is ever proposed.
    #[default]
    None,
    /// `delta = scale * Z + adaptation * (theta - G) + drift_gain * (G - anchor)`.
    Gaussian {
        scale: f64,
        #[serde(default)]
        adaptation: f64,
        #[serde(default)]
        drift_gain: f64,
        #[serde(default)]
        drift_anchor: Option<Vec<f64>>,
        #[serde(default)]
        meta_scale: f64,
        #[serde(default)]
        metric_scale: f64,
    },
    /// Goals redrawn uniformly over the domain.
    Jump,
    /// Goals replaced by a fixed target.
    Reset { target: Vec<f64> },
    /// Each coordinate moves by `+step` or `-step` with equal odds.
    Branch { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub goals: Vec<f64>,
    /// Internal parameters `theta`; defaults to the goals.
    #[serde(default)]
    pub internal: Option<Vec<f64>>,
    /// Goal metric weights; defaults to all ones.
    #[serde(default)]
    pub metric_weights: Option<Vec<f64>>,
    #[serde(default = "default_exponent")]
    pub metric_exponent: f64,
    /// Initial goal step size under moderated evolution.
    #[serde(default = "default_variation_scale")]
    pub variation_scale: f64,
}

fn default_exponent() -> f64 {
    2.0
}

fn default_variation_scale() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    /// Rollouts per distribution estimate.
    pub r_samples: usize,
    /// Rollouts per kernel row.
    pub samples_per_cell: usize,
    pub mpv_ensemble: usize,
    pub mpv_quantile: f64,
    /// The moderated controller keeps `gain * c` of the variation gap per interval.
    pub moderation_gain: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            r_samples: 16,
            samples_per_cell: 16,
            mpv_ensemble: 64,
            mpv_quantile: 0.95,
            moderation_gain: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub candidates: usize,
    /// Penalty on goal displacement over the lookahead.
    pub lambda: f64,
    /// Extra true evaluations spent on pattern-search polishing.
    pub polish_iters: usize,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            candidates: 12,
            lambda: 0.1,
            polish_iters: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    pub window: usize,
    pub theta_low: f64,
    pub flags: FeasibilityFlags,
    /// Global-search rollouts allowed before `budget_ok` is revoked.
    pub compute_budget: Option<u64>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            window: crate::metagoal::DEFAULT_WINDOW,
            theta_low: crate::metagoal::DEFAULT_THETA_LOW,
            flags: FeasibilityFlags::default(),
            compute_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub goal_dim: usize,
    pub domain: DomainBox,
    #[serde(default)]
    pub env_noise_sigma: f64,
    pub objective: Objective,
    #[serde(default)]
    pub proposal: Proposal,
    /// Fraction of the gap to the objective optimum closed per pursuit step.
    #[serde(default = "default_pursuit_rate")]
    pub pursuit_rate: f64,
    /// Fraction of each N-step spent on self-modification instead of pursuit.
    #[serde(default = "default_modification_rate")]
    pub modification_rate: f64,
    pub metagoal: MetaGoalSpec,
    /// Number of `M`-step intervals to run.
    pub intervals: usize,
    #[serde(default = "default_cells")]
    pub grid_cells_per_dim: usize,
    #[serde(default)]
    pub seed: u64,
    pub initial: InitialState,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub global: GlobalConfig,
    #[serde(default)]
    pub hybrid: HybridConfig,
}

fn default_pursuit_rate() -> f64 {
    0.5
}

fn default_modification_rate() -> f64 {
    0.25
}

fn default_cells() -> usize {
    16
}

fn unit_interval(v: &mut Vec<String>, name: &str, x: f64) {
    if !(0.0..=1.0).contains(&x) {
        v.push(format!("{name} must lie in [0, 1], got {x}"));
    }
}

fn nonneg(v: &mut Vec<String>, name: &str, x: f64) {
    if !(x >= 0.0 && x.is_finite()) {
        v.push(format!("{name} must be finite and nonnegative, got {x}"));
    }
}

fn dim_check(v: &mut Vec<String>, name: &str, len: usize, n: usize) {
    if len != n {
        v.push(format!("{name} has {len} entries, goal_dim is {n}"));
    }
}

impl ScenarioConfig {
    /// Every violated constraint, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let n = self.goal_dim;
        if n == 0 {
            v.push("goal_dim must be at least 1".into());
        }
        if let Err(e) = self.domain.validate() {
            v.push(format!("domain: {e}"));
        } else {
            dim_check(&mut v, "domain", self.domain.dim(), n);
        }
        nonneg(&mut v, "env_noise_sigma", self.env_noise_sigma);
        self.objective.violations(n, &mut v);
        match &self.proposal {
            Proposal::Gaussian {
                scale,
                adaptation,
                drift_gain,
                drift_anchor,
                meta_scale,
                metric_scale,
            } => {
                nonneg(&mut v, "proposal.scale", *scale);
                nonneg(&mut v, "proposal.meta_scale", *meta_scale);
                nonneg(&mut v, "proposal.metric_scale", *metric_scale);
                if !adaptation.is_finite() || !drift_gain.is_finite() {
                    v.push("proposal.adaptation and proposal.drift_gain must be finite".into());
                }
                if let Some(a) = drift_anchor {
                    dim_check(&mut v, "proposal.drift_anchor", a.len(), n);
                }
            }
            Proposal::Reset { target } => dim_check(&mut v, "proposal.target", target.len(), n),
            Proposal::Branch { step } => nonneg(&mut v, "proposal.step", *step),
            Proposal::None | Proposal::Jump => {}
        }
        unit_interval(&mut v, "pursuit_rate", self.pursuit_rate);
        unit_interval(&mut v, "modification_rate", self.modification_rate);
        v.extend(self.metagoal.violations());
        if self.intervals == 0 {
            v.push("intervals must be at least 1".into());
        }
        if self.grid_cells_per_dim == 0 {
            v.push("grid_cells_per_dim must be at least 1".into());
        } else {
            let cells = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(self.grid_cells_per_dim));
            if cells.is_none_or(|c| c > DEFAULT_CELL_CAP) {
                v.push(format!(
                    "grid_cells_per_dim^goal_dim exceeds the {DEFAULT_CELL_CAP}-cell cap"
                ));
            }
        }
        let init = &self.initial;
        dim_check(&mut v, "initial.goals", init.goals.len(), n);
        if init.goals.len() == n && self.domain.dim() == n && !self.domain.contains(&init.goals, 0.0) {
            v.push("initial.goals must lie inside the domain".into());
        }
        if let Some(t) = &init.internal {
            dim_check(&mut v, "initial.internal", t.len(), n);
        }
        if let Some(w) = &init.metric_weights {
            dim_check(&mut v, "initial.metric_weights", w.len(), n);
        }
        if let Err(e) = MetricParams::new(
            init.metric_weights.clone().unwrap_or_else(|| alloc::vec![1.0; n.max(1)]),
            init.metric_exponent,
        ) {
            v.push(format!("initial metric: {e}"));
        }
        nonneg(&mut v, "initial.variation_scale", init.variation_scale);
        let est = &self.estimation;
        if est.r_samples == 0 || est.samples_per_cell == 0 || est.mpv_ensemble == 0 {
            v.push("estimation sample counts must be at least 1".into());
        }
        if !(est.mpv_quantile > 0.0 && est.mpv_quantile <= 1.0) {
            v.push(format!("estimation.mpv_quantile must lie in (0, 1], got {}", est.mpv_quantile));
        }
        unit_interval(&mut v, "estimation.moderation_gain", est.moderation_gain);
        if self.global.candidates == 0 {
            v.push("global.candidates must be at least 1".into());
        }
        nonneg(&mut v, "global.lambda", self.global.lambda);
        if self.hybrid.window == 0 {
            v.push("hybrid.window must be at least 1".into());
        }
        unit_interval(&mut v, "hybrid.theta_low", self.hybrid.theta_low);
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain.clone(), self.grid_cells_per_dim)
    }

    /// Fixed analysis metric: unweighted Euclidean on goals.
    pub fn super_metric(&self) -> MetricParams {
        MetricParams::euclidean(self.goal_dim)
    }

    pub fn initial_metric(&self) -> Result<MetricParams> {
        MetricParams::new(
            self.initial
                .metric_weights
                .clone()
                .unwrap_or_else(|| alloc::vec![1.0; self.goal_dim]),
            self.initial.metric_exponent,
        )
    }
}
