use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{Proposal, ScenarioConfig};
use crate::error::Result;
use crate::float::{floor, sqrt};
use crate::goalspace::{AugmentedState, GoalVector, MetricParams};
use crate::metagoal::{
    check_drift_bounds, check_dynamic_contraction, check_goal_contraction, enforce_contraction,
    enforce_dynamic_contraction, global_modification_search, GoalHistory, Snapshot, Variant,
};
use crate::rng::SimRng;

/// Weights stay at or above this after mutation.
const MIN_WEIGHT: f64 = 1e-3;

/// Env noise draws are truncated at this many standard deviations.
const NOISE_TRUNCATION: f64 = 3.0;

/// A simulated agent: augmented state, its recent goal snapshots, the
/// current step index and the metagoal regime it runs under.
///
/// `state.internal_params` is `theta` followed by the moderated step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub state: AugmentedState,
    pub history: GoalHistory,
    pub step: u64,
    pub mode: Variant,
}

/// What one N-step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// State leaving the metagoal filter, before environment noise.
    pub emitted: AugmentedState,
    pub satisfaction: f64,
    /// Active metagoal check on the realized history, if one applies.
    pub check: Option<bool>,
    /// Goal distance moved this N-step under the agent's metric.
    pub goal_step: f64,
    /// True rollouts spent by global search.
    pub rollouts: usize,
}

impl Agent {
    pub fn initial(cfg: &ScenarioConfig) -> Result<Agent> {
        cfg.validate()?;
        let goals = GoalVector::new(cfg.initial.goals.clone(), &cfg.domain)?;
        let mut internal = cfg.initial.internal.clone().unwrap_or_else(|| cfg.initial.goals.clone());
        internal.push(cfg.initial.variation_scale);
        let state = AugmentedState {
            goals,
            metagoal_params: cfg.metagoal.numeric_params(),
            metric_params: cfg.initial_metric()?,
            internal_params: internal,
        };
        let mut history = GoalHistory::new(cfg.metagoal.inner_interval);
        history.push(snapshot(0, &state))?;
        let mode = match cfg.metagoal.variant {
            Variant::Hybrid => crate::metagoal::HybridPolicyState::new(cfg.hybrid.flags, cfg.hybrid.window, cfg.hybrid.theta_low)?
                .current_mode,
            v => v,
        };
        Ok(Agent { state, history, step: 0, mode })
    }

    pub fn dim(&self) -> usize {
        self.state.goals.dim()
    }

    pub fn goals(&self) -> &[f64] {
        self.state.goals.coords()
    }

    pub fn theta(&self) -> &[f64] {
        &self.state.internal_params[..self.dim()]
    }

    pub fn variation_scale(&self) -> f64 {
        self.state.internal_params[self.dim()]
    }

    pub fn set_variation_scale(&mut self, s: f64) {
        let n = self.dim();
        self.state.internal_params[n] = s;
    }

    /// Same agent with goals (and every remembered goal) shifted so the
    /// current goals sit at `goals`.
    pub fn translated_to(&self, goals: &[f64]) -> Agent {
        let offset: Vec<f64> = goals.iter().zip(self.goals()).map(|(a, b)| a - b).collect();
        let mut a = self.clone();
        a.state.goals = GoalVector::from_coords(goals.to_vec());
        a.history.translate(&offset);
        a
    }
}

pub(crate) fn snapshot(step: u64, s: &AugmentedState) -> Snapshot {
    Snapshot {
        step,
        goals: s.goals.clone(),
        metagoal_params: s.metagoal_params.clone(),
        metric_params: s.metric_params.clone(),
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let z = normal(rng);
        if z.abs() <= NOISE_TRUNCATION {
            return z;
        }
    }
}

/// Raw self-modification proposal `(goals, metagoal params, metric)`.
fn propose(cfg: &ScenarioConfig, agent: &Agent, rng: &mut SimRng) -> (Vec<f64>, Vec<f64>, MetricParams) {
    let g = agent.goals();
    let n = g.len();
    let mut meta = agent.state.metagoal_params.clone();
    let mut metric = agent.state.metric_params.clone();
    let mut goals = match &cfg.proposal {
        Proposal::None => g.to_vec(),
        Proposal::Gaussian {
            scale,
            adaptation,
            drift_gain,
            drift_anchor,
            meta_scale,
            metric_scale,
        } => {
            let anchor = drift_anchor.clone().unwrap_or_else(|| cfg.domain.center());
            let theta = agent.theta();
            let goals = (0..n)
                .map(|i| g[i] + scale * normal(rng) + adaptation * (theta[i] - g[i]) + drift_gain * (g[i] - anchor[i]))
                .collect();
            if agent.mode.mutates_meta() {
                for m in meta.iter_mut() {
                    *m += meta_scale * normal(rng);
                }
            }
            if agent.mode.mutates_metric() {
                let w: Vec<f64> = metric
                    .weights()
                    .iter()
                    .map(|w| (w + metric_scale * normal(rng)).max(MIN_WEIGHT))
                    .collect();
                let total: f64 = w.iter().sum();
                let w = w.into_iter().map(|x| x * n as f64 / total).collect();
                if let Ok(m) = MetricParams::new(w, metric.exponent()) {
                    metric = m;
                }
            }
            goals
        }
        Proposal::Jump => (0..n)
            .map(|i| cfg.domain.lo()[i] + rng.random::<f64>() * cfg.domain.width(i))
            .collect(),
        Proposal::Reset { target } => target.clone(),
        Proposal::Branch { step } => (0..n)
            .map(|i| g[i] + if rng.random::<bool>() { *step } else { -*step })
            .collect(),
    };
    cfg.domain.clamp_in_place(&mut goals);
    (goals, meta, metric)
}

/// Advances the agent by one N-step: pursuit of the base objective, a
/// self-modification proposal, the metagoal filter for the agent's mode,
/// then environment noise on the goals.
pub fn step_interval(agent: &mut Agent, cfg: &ScenarioConfig, rng: &mut SimRng) -> Result<StepReport> {
    let spec = &cfg.metagoal;
    let n_steps = spec.inner_interval;
    let n = agent.dim();

    let pursuit = n_steps - floor(cfg.modification_rate * n_steps as f64) as u64;
    for i in 0..pursuit {
        let target = cfg.objective.optimum(agent.goals(), agent.step + i);
        for (th, t) in agent.state.internal_params[..n].iter_mut().zip(&target) {
            *th += cfg.pursuit_rate * (t - *th);
        }
    }

    let (raw_goals, raw_meta, raw_metric) = if cfg.modification_rate > 0.0 {
        propose(cfg, agent, rng)
    } else {
        (agent.goals().to_vec(), agent.state.metagoal_params.clone(), agent.state.metric_params.clone())
    };
    let search_seed = rng.next_u64();
    let metric = agent.state.metric_params.clone();
    let mode_spec = spec.with_variant(agent.mode);
    let mut rollouts = 0;

    let emitted = match agent.mode {
        Variant::GoalStability if agent.history.len() >= 2 => {
            let goals = enforce_contraction(&GoalVector::from_coords(raw_goals), &agent.history, &mode_spec, &metric)?;
            AugmentedState { goals, ..agent.state.clone() }
        }
        Variant::GoalStabilityDynamicMeta | Variant::GoalStabilityDynamicMetric if agent.history.len() >= 2 => {
            let (goals, meta, m) = enforce_dynamic_contraction(
                (&GoalVector::from_coords(raw_goals), &raw_meta, &raw_metric),
                &agent.history,
                &mode_spec,
                &metric,
            )?;
            AugmentedState {
                goals,
                metagoal_params: meta,
                metric_params: m,
                internal_params: agent.state.internal_params.clone(),
            }
        }
        Variant::ModeratedEvolution => {
            let g = agent.goals();
            let delta: Vec<f64> = raw_goals.iter().zip(g).map(|(a, b)| a - b).collect();
            let norm = sqrt(delta.iter().map(|d| d * d).sum());
            let mut goals = g.to_vec();
            if norm > 0.0 {
                let s = agent.variation_scale() / norm;
                goals.iter_mut().zip(&delta).for_each(|(x, d)| *x += s * d);
                cfg.domain.clamp_in_place(&mut goals);
            }
            AugmentedState {
                goals: GoalVector::from_coords(goals),
                ..agent.state.clone()
            }
        }
        Variant::GlobalModerated | Variant::GlobalModeratedDynamic => {
            let raw = AugmentedState {
                goals: GoalVector::from_coords(raw_goals),
                metagoal_params: raw_meta,
                metric_params: raw_metric,
                internal_params: agent.state.internal_params.clone(),
            };
            let out = global_modification_search(cfg, agent, &mode_spec, cfg.global.candidates, search_seed, Some(&raw))?;
            rollouts = out.evaluations;
            out.state
        }
        _ => AugmentedState {
            goals: GoalVector::from_coords(raw_goals),
            metagoal_params: raw_meta,
            metric_params: raw_metric,
            internal_params: agent.state.internal_params.clone(),
        },
    };

    let sigma = cfg.env_noise_sigma;
    let mut goals = emitted.goals.coords().to_vec();
    for g in goals.iter_mut() {
        *g += sigma * truncated_normal(rng);
    }
    cfg.domain.clamp_in_place(&mut goals);

    let previous = agent.goals().to_vec();
    agent.state = AugmentedState {
        goals: GoalVector::from_coords(goals),
        ..emitted.clone()
    };
    agent.step += n_steps;
    agent.history.push(snapshot(agent.step, &agent.state))?;

    let goal_step = metric.distance_unchecked(agent.goals(), &previous);
    let satisfaction = cfg.objective.satisfaction(agent.theta(), agent.goals(), agent.step);
    let check = match agent.mode {
        Variant::GoalStability if agent.history.len() >= 3 => {
            Some(check_goal_contraction(&agent.history, &mode_spec, &metric)?)
        }
        Variant::GoalStabilityDynamicMeta | Variant::GoalStabilityDynamicMetric if agent.history.len() >= 3 => {
            Some(check_dynamic_contraction(&agent.history, &mode_spec, &metric)?.overall())
        }
        Variant::GlobalModerated | Variant::GlobalModeratedDynamic => {
            Some(check_drift_bounds(&agent.history, &mode_spec, &metric)?.overall())
        }
        _ => None,
    };
    Ok(StepReport {
        emitted,
        satisfaction,
        check,
        goal_step,
        rollouts,
    })
}
