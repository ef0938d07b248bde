use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::agent::{step_interval, Agent};
use super::config::ScenarioConfig;
use super::estimate::estimate_R;
use crate::error::Result;
use crate::goalspace::{augmented_distance, total_variation, wasserstein1, AugmentedState, DiscreteDistribution};
use crate::metagoal::{
    check_moderated_contraction, hybrid_policy_step, max_plausible_variation, HybridPolicyState, Variant,
};
use crate::rng::{self, purpose};

/// Per-interval summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub index: usize,
    /// Mode in force during the interval.
    pub mode: Variant,
    /// Mean satisfaction over the interval's N-steps.
    pub satisfaction: f64,
    /// Goal distance of the interval's last N-step (agent metric).
    pub goal_step: f64,
    /// Goal distance between interval start and end (agent metric at start).
    pub goal_interval: f64,
    /// Super-metric distance between interval start and end states.
    pub state_distance: f64,
    /// Conjunction of the active metagoal checks, when any applied.
    pub check: Option<bool>,
    /// Maximum plausible variation at interval start (moderated mode only).
    pub mpv: Option<f64>,
    /// Moderated goal step size in force during the interval.
    pub variation_scale: f64,
    /// `W1(R(t+M), R(t))`.
    pub residual_w1: f64,
    /// `TV(R(t+M), R(t))`.
    pub residual_tv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// `(step, state)` at every N-step boundary, starting at step 0.
    pub snapshots: Vec<(u64, AugmentedState)>,
    /// `R(t)` at each interval boundary; one more than the interval count.
    pub distributions: Vec<DiscreteDistribution>,
    pub intervals: Vec<IntervalMetrics>,
    /// N-steps per interval.
    pub steps_per_interval: usize,
}

impl TrajectoryRecord {
    pub fn residuals_w1(&self) -> Vec<f64> {
        self.intervals.iter().map(|m| m.residual_w1).collect()
    }

    pub fn residuals_tv(&self) -> Vec<f64> {
        self.intervals.iter().map(|m| m.residual_tv).collect()
    }

    /// The agent at the start of interval `i`, rebuilt from the snapshots.
    pub fn agent_at_interval(&self, cfg: &ScenarioConfig, i: usize) -> Result<Agent> {
        let mut agent = Agent::initial(cfg)?;
        let end = i * self.steps_per_interval;
        let first = end.saturating_sub(crate::metagoal::HISTORY_CAPACITY - 1);
        let mut history = crate::metagoal::GoalHistory::new(cfg.metagoal.inner_interval);
        for (step, s) in &self.snapshots[first..=end] {
            history.push(super::agent::snapshot(*step, s))?;
        }
        let (step, state) = &self.snapshots[end];
        agent.state = state.clone();
        agent.step = *step;
        agent.history = history;
        agent.mode = self.intervals.get(i).map_or(agent.mode, |m| m.mode);
        Ok(agent)
    }
}

/// Runs the configured number of intervals, estimating `R(t)` at every
/// interval boundary. Deterministic in `cfg.seed`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let seed = cfg.seed;
    let grid = Arc::new(cfg.grid()?);
    let mut agent = Agent::initial(cfg)?;
    let mut main = rng::stream(seed, purpose::MAIN, 0);
    let mut policy = match cfg.metagoal.variant {
        Variant::Hybrid => Some(HybridPolicyState::new(cfg.hybrid.flags, cfg.hybrid.window, cfg.hybrid.theta_low)?),
        _ => None,
    };
    let per = cfg.metagoal.steps_per_interval();
    let super_metric = cfg.super_metric();
    let est = &cfg.estimation;
    let mpv_seed = rng::derive(seed, purpose::MPV, 0);

    let mut snapshots = Vec::with_capacity(cfg.intervals * per + 1);
    snapshots.push((0, agent.state.clone()));
    let mut distributions = Vec::with_capacity(cfg.intervals + 1);
    let mut intervals = Vec::with_capacity(cfg.intervals);
    let mut mpv_prev: Option<f64> = None;
    let mut rollouts_spent: u64 = 0;

    for i in 0..cfg.intervals {
        distributions.push(estimate_R(cfg, &agent, &grid, est.r_samples, rng::derive(seed, purpose::ESTIMATE, i as u64))?);

        let mode = agent.mode;
        let mut check: Option<bool> = None;
        let mut mpv = None;
        if mode == Variant::ModeratedEvolution {
            let now = max_plausible_variation(cfg, &agent, per, est.mpv_ensemble, est.mpv_quantile, mpv_seed)?;
            if let Some(prev) = mpv_prev {
                check = Some(check_moderated_contraction(now, prev, &cfg.metagoal));
            }
            mpv = Some(now);
            mpv_prev = Some(now);
        } else {
            mpv_prev = None;
        }
        let variation_scale = agent.variation_scale();

        let start = agent.state.clone();
        let start_metric = agent.state.metric_params.clone();
        let mut satisfaction = 0.0;
        let mut goal_step = 0.0;
        for _ in 0..per {
            let report = step_interval(&mut agent, cfg, &mut main)?;
            satisfaction += report.satisfaction;
            goal_step = report.goal_step;
            rollouts_spent += report.rollouts as u64;
            if let Some(ok) = report.check {
                check = Some(check.unwrap_or(true) && ok);
            }
            snapshots.push((agent.step, agent.state.clone()));
        }
        satisfaction /= per as f64;

        if let Some(now) = mpv {
            // the next interval's variation lands a fraction gain * c of the
            // current gap away from the target
            let target = cfg.metagoal.target_variation;
            if now > 0.0 {
                let rho = est.moderation_gain * cfg.metagoal.contraction_factor;
                let s = agent.variation_scale() * (target + rho * (now - target)) / now;
                agent.set_variation_scale(s.max(0.0));
            }
        }

        if let Some(p) = policy.as_mut() {
            if cfg.hybrid.compute_budget.is_some_and(|b| rollouts_spent > b) {
                p.flags.budget_ok = false;
            }
            *p = hybrid_policy_step(p, satisfaction)?;
            agent.mode = p.current_mode;
        }

        intervals.push(IntervalMetrics {
            index: i,
            mode,
            satisfaction,
            goal_step,
            goal_interval: start_metric.distance_unchecked(agent.goals(), start.goals.coords()),
            state_distance: augmented_distance(&start, &agent.state, &super_metric)?,
            check,
            mpv,
            variation_scale,
            residual_w1: 0.0,
            residual_tv: 0.0,
        });
    }
    distributions.push(estimate_R(
        cfg,
        &agent,
        &grid,
        est.r_samples,
        rng::derive(seed, purpose::ESTIMATE, cfg.intervals as u64),
    )?);
    for (i, m) in intervals.iter_mut().enumerate() {
        m.residual_w1 = wasserstein1(&distributions[i + 1], &distributions[i])?;
        m.residual_tv = total_variation(&distributions[i + 1], &distributions[i])?;
    }
    Ok(TrajectoryRecord {
        snapshots,
        distributions,
        intervals,
        steps_per_interval: per,
    })
}
