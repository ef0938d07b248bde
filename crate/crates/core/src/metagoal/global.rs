//! Search over bounded self-modifications scored by seeded lookahead rollouts.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{drift_report, project_into_ball, MetaGoalSpec, Variant};
use crate::error::{Error, Result};
use crate::fixpoint::SurrogateModel;
use crate::float::pow;
use crate::goalspace::{AugmentedState, GoalVector, MetricParams};
use crate::rng::{self, purpose, SimRng};
use crate::simulator::{step_interval, Agent, ScenarioConfig};

const MIN_WEIGHT: f64 = 1e-3;
const REFINE_ITERS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSearchOutcome {
    pub state: AugmentedState,
    pub score: f64,
    /// True rollouts spent.
    pub evaluations: usize,
    /// Index of the winning candidate; 0 is the null modification.
    pub chosen: usize,
}

/// Mean satisfaction over the lookahead minus `lambda` times the goal
/// displacement it ends with. Rollouts run unfiltered from `candidate`
/// with a stream fixed by `seed`, so candidates share randomness.
pub fn candidate_score(cfg: &ScenarioConfig, agent: &Agent, candidate: &AugmentedState, seed: u64) -> Result<f64> {
    let mut a = agent.clone();
    a.state.goals = candidate.goals.clone();
    a.state.metagoal_params = candidate.metagoal_params.clone();
    a.state.metric_params = candidate.metric_params.clone();
    a.mode = Variant::Unconstrained;
    let start = candidate.goals.coords().to_vec();
    let steps = cfg.metagoal.lookahead_steps().max(1);
    let mut r = rng::stream(seed, purpose::GLOBAL, 0);
    let mut total = 0.0;
    for _ in 0..steps {
        total += step_interval(&mut a, cfg, &mut r)?.satisfaction;
    }
    let drift = agent.state.metric_params.distance_unchecked(a.goals(), &start);
    Ok(total / steps as f64 - cfg.global.lambda * drift)
}

struct Space<'a> {
    current: &'a AugmentedState,
    cfg: &'a ScenarioConfig,
    spec: &'a MetaGoalSpec,
    metric: &'a MetricParams,
    dynamic: bool,
}

impl Space<'_> {
    fn features(&self, s: &AugmentedState) -> Vec<f64> {
        let mut f = s.goals.coords().to_vec();
        if self.dynamic {
            f.extend_from_slice(&s.metagoal_params);
            f.extend_from_slice(s.metric_params.weights());
        }
        f
    }

    /// Maps a feature vector to a state inside the drift balls and domain.
    fn constrain(&self, f: &[f64]) -> AugmentedState {
        let cur = self.current;
        let n = cur.goals.dim();
        let mut goals = project_into_ball(cur.goals.coords(), &f[..n], self.spec.drift_bound, self.metric);
        self.cfg.domain.clamp_in_place(&mut goals);
        let mut s = AugmentedState {
            goals: GoalVector::from_coords(goals),
            ..cur.clone()
        };
        if self.dynamic {
            let k = cur.metagoal_params.len();
            if k > 0 {
                s.metagoal_params = project_into_ball(
                    &cur.metagoal_params,
                    &f[n..n + k],
                    self.spec.meta_drift_bound,
                    &self.metric.canonical(k),
                );
            }
            let mut flat: Vec<f64> = f[n + k..].iter().map(|w| w.max(MIN_WEIGHT)).collect();
            flat.push(1.0 / cur.metric_params.exponent());
            let cur_flat = cur.metric_params.flattened();
            let projected = project_into_ball(&cur_flat, &flat, self.spec.metric_drift_bound, &self.metric.canonical(n + 1));
            if let Ok(m) = MetricParams::from_flattened(&projected) {
                s.metric_params = m;
            }
        }
        s
    }

    fn admissible(&self, s: &AugmentedState) -> bool {
        let from = (&self.current.goals, self.current.metagoal_params.as_slice(), &self.current.metric_params);
        let to = (&s.goals, s.metagoal_params.as_slice(), &s.metric_params);
        drift_report(self.spec, self.metric, from, to).is_ok_and(|r| r.overall())
    }

    /// Per-feature step scale for local search.
    fn radii(&self) -> Vec<f64> {
        let n = self.current.goals.dim();
        let mut r = alloc::vec![self.spec.drift_bound; n];
        if self.dynamic {
            r.extend(core::iter::repeat_n(self.spec.meta_drift_bound, self.current.metagoal_params.len()));
            r.extend(core::iter::repeat_n(self.spec.metric_drift_bound, n));
        }
        r
    }

    fn sample(&self, rng: &mut SimRng) -> AugmentedState {
        let cur = self.current;
        let n = cur.goals.dim();
        let mut f = ball_point(cur.goals.coords(), self.spec.drift_bound, self.metric, rng);
        if self.dynamic {
            let k = cur.metagoal_params.len();
            if k > 0 {
                f.extend(ball_point(&cur.metagoal_params, self.spec.meta_drift_bound, &self.metric.canonical(k), rng));
            }
            let canon = self.metric.canonical(n);
            f.extend(ball_point(cur.metric_params.weights(), self.spec.metric_drift_bound, &canon, rng));
        }
        self.constrain(&f)
    }
}

/// Uniform-radius point in the metric ball of `radius` around `center`.
fn ball_point(center: &[f64], radius: f64, m: &MetricParams, rng: &mut SimRng) -> Vec<f64> {
    let z: Vec<f64> = center.iter().map(|_| rng.sample(StandardNormal)).collect();
    let zero = alloc::vec![0.0; center.len()];
    let norm = m.distance_unchecked(&z, &zero);
    let u: f64 = rng.random();
    if norm <= 0.0 || radius <= 0.0 {
        return center.to_vec();
    }
    let r = radius * pow(u, 1.0 / center.len() as f64) / norm;
    center.iter().zip(&z).map(|(c, d)| c + r * d).collect()
}

/// Scores explicit candidates (only those inside the drift bounds) and
/// returns the best; the current state wins ties and is the fallback.
pub fn global_search_with_candidates(
    cfg: &ScenarioConfig,
    agent: &Agent,
    spec: &MetaGoalSpec,
    candidates: &[AugmentedState],
    seed: u64,
) -> Result<GlobalSearchOutcome> {
    if !spec.variant.is_global() {
        return Err(Error::Mode(spec.variant.name().into()));
    }
    let space = Space {
        current: &agent.state,
        cfg,
        spec,
        metric: &agent.state.metric_params,
        dynamic: spec.variant == Variant::GlobalModeratedDynamic,
    };
    let score_seed = rng::derive(seed, purpose::GLOBAL, 0);
    let mut best: Option<(usize, f64)> = None;
    let mut evaluations = 0;
    for (i, c) in candidates.iter().enumerate() {
        if !space.admissible(c) {
            continue;
        }
        let s = candidate_score(cfg, agent, c, score_seed)?;
        evaluations += 1;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    match best {
        Some((i, score)) => Ok(GlobalSearchOutcome {
            state: candidates[i].clone(),
            score,
            evaluations,
            chosen: i,
        }),
        None => Ok(GlobalSearchOutcome {
            state: agent.state.clone(),
            score: candidate_score(cfg, agent, &agent.state, score_seed)?,
            evaluations: evaluations + 1,
            chosen: 0,
        }),
    }
}

/// Samples `candidates` modifications inside the drift bounds (the null
/// modification first, then `raw` pulled into the bounds if given), scores
/// them by lookahead rollouts, refines the best with a surrogate of the
/// score over the candidate space, and returns the best admissible state.
pub fn global_modification_search(
    cfg: &ScenarioConfig,
    agent: &Agent,
    spec: &MetaGoalSpec,
    candidates: usize,
    seed: u64,
    raw: Option<&AugmentedState>,
) -> Result<GlobalSearchOutcome> {
    if !spec.variant.is_global() {
        return Err(Error::Mode(spec.variant.name().into()));
    }
    if candidates == 0 {
        return Err(Error::invalid("at least one candidate is required"));
    }
    let space = Space {
        current: &agent.state,
        cfg,
        spec,
        metric: &agent.state.metric_params,
        dynamic: spec.variant == Variant::GlobalModeratedDynamic,
    };
    let mut pool = alloc::vec![agent.state.clone()];
    if let Some(raw) = raw.filter(|_| candidates > 1) {
        pool.push(space.constrain(&space.features(raw)));
    }
    let mut r = rng::stream(seed, purpose::GLOBAL, 1);
    while pool.len() < candidates {
        pool.push(space.sample(&mut r));
    }
    let mut out = global_search_with_candidates(cfg, agent, spec, &pool, seed)?;

    let radii = space.radii();
    if candidates < 3 || radii.iter().all(|r| *r <= 0.0) {
        return Ok(out);
    }
    let score_seed = rng::derive(seed, purpose::GLOBAL, 0);
    let mut scored: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(pool.len() + 1);
    for c in &pool {
        if space.admissible(c) {
            scored.push((space.features(c), alloc::vec![candidate_score(cfg, agent, c, score_seed)?]));
        }
    }
    let consider = |state: AugmentedState, out: &mut GlobalSearchOutcome| -> Result<f64> {
        if !space.admissible(&state) {
            return Ok(f64::NEG_INFINITY);
        }
        let s = candidate_score(cfg, agent, &state, score_seed)?;
        out.evaluations += 1;
        if s > out.score {
            out.score = s;
            out.state = state;
            out.chosen = candidates;
        }
        Ok(s)
    };

    if let Ok(model) = SurrogateModel::fit(&scored) {
        let predict = |f: &[f64]| model.predict(&space.features(&space.constrain(f)))[0];
        let mut x = space.features(&out.state);
        let mut fx = predict(&x);
        let mut steps: Vec<f64> = radii.iter().map(|r| 0.5 * r).collect();
        for _ in 0..REFINE_ITERS {
            let mut improved = false;
            for a in 0..x.len() {
                if steps[a] <= 0.0 {
                    continue;
                }
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[a] += dir * steps[a];
                    let y = space.features(&space.constrain(&y));
                    let fy = predict(&y);
                    if fy > fx {
                        x = y;
                        fx = fy;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                steps.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
        consider(space.constrain(&x), &mut out)?;
    }

    // pattern search on the true score
    let mut steps: Vec<f64> = radii.iter().map(|r| 0.25 * r).collect();
    let mut budget = cfg.global.polish_iters;
    while budget > 0 && steps.iter().any(|s| *s > 1e-12) {
        let base = space.features(&out.state);
        let mut improved = false;
        'axes: for a in 0..base.len() {
            for dir in [1.0, -1.0] {
                if budget == 0 {
                    break 'axes;
                }
                if steps[a] <= 0.0 {
                    continue;
                }
                let mut y = base.clone();
                y[a] += dir * steps[a];
                let before = out.score;
                budget -= 1;
                if consider(space.constrain(&y), &mut out)? > before {
                    improved = true;
                    break 'axes;
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    Ok(out)
}
