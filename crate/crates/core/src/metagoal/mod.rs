//! Metagoal specifications, condition checks, enforcement, moderated
//! evolution, global self-modification search and the hybrid policy.

mod global;
mod hybrid;
mod mpv;

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goalspace::{GoalVector, MetricParams};

pub use global::{candidate_score, global_modification_search, global_search_with_candidates, GlobalSearchOutcome};
pub use hybrid::{hybrid_policy_step, FeasibilityFlags, HybridPolicyState, DEFAULT_THETA_LOW, DEFAULT_WINDOW};
pub use mpv::{max_plausible_variation, quantile_index};

/// Distances at or below this count as zero in strict-inequality checks.
pub const STATIONARY_EPS: f64 = 1e-12;

/// Projections land this fraction inside the contraction ball.
pub const PROJECTION_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    GoalStability,
    GoalStabilityDynamicMeta,
    GoalStabilityDynamicMetric,
    ModeratedEvolution,
    GlobalModerated,
    GlobalModeratedDynamic,
    Hybrid,
    Unconstrained,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::GoalStability,
        Variant::GoalStabilityDynamicMeta,
        Variant::GoalStabilityDynamicMetric,
        Variant::ModeratedEvolution,
        Variant::GlobalModerated,
        Variant::GlobalModeratedDynamic,
        Variant::Hybrid,
        Variant::Unconstrained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::GoalStability => "GoalStability",
            Variant::GoalStabilityDynamicMeta => "GoalStabilityDynamicMeta",
            Variant::GoalStabilityDynamicMetric => "GoalStabilityDynamicMetric",
            Variant::ModeratedEvolution => "ModeratedEvolution",
            Variant::GlobalModerated => "GlobalModerated",
            Variant::GlobalModeratedDynamic => "GlobalModeratedDynamic",
            Variant::Hybrid => "Hybrid",
            Variant::Unconstrained => "Unconstrained",
        }
    }

    pub fn is_global(self) -> bool {
        matches!(self, Variant::GlobalModerated | Variant::GlobalModeratedDynamic)
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, Variant::GoalStabilityDynamicMeta | Variant::GoalStabilityDynamicMetric)
    }

    /// Whether the variant mutates metagoal parameters.
    pub fn mutates_meta(self) -> bool {
        matches!(
            self,
            Variant::GoalStabilityDynamicMeta | Variant::GoalStabilityDynamicMetric | Variant::GlobalModeratedDynamic
        )
    }

    /// Whether the variant mutates its own goal metric.
    pub fn mutates_metric(self) -> bool {
        matches!(self, Variant::GoalStabilityDynamicMetric | Variant::GlobalModeratedDynamic)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaGoalSpec {
    pub variant: Variant,
    /// Contraction factor `c`.
    pub contraction_factor: f64,
    /// Steps between goal snapshots (`N`).
    pub inner_interval: u64,
    /// `M / N`; an interval is `M` steps.
    #[serde(default = "one")]
    pub interval_ratio: u64,
    /// Target maximum plausible variation `m_M`.
    #[serde(default)]
    pub target_variation: f64,
    /// Goal drift bound `k`.
    #[serde(default)]
    pub drift_bound: f64,
    #[serde(default)]
    pub meta_drift_bound: f64,
    #[serde(default)]
    pub metric_drift_bound: f64,
    /// Lookahead `K` in steps for global search.
    #[serde(default)]
    pub horizon: u64,
}

fn one() -> u64 {
    1
}

impl MetaGoalSpec {
    pub fn new(variant: Variant, contraction_factor: f64, inner_interval: u64) -> Self {
        MetaGoalSpec {
            variant,
            contraction_factor,
            inner_interval,
            interval_ratio: 1,
            target_variation: 0.0,
            drift_bound: 0.0,
            meta_drift_bound: 0.0,
            metric_drift_bound: 0.0,
            horizon: 0,
        }
    }

    /// `M`, the interval length in steps.
    pub fn outer_interval(&self) -> u64 {
        self.inner_interval * self.interval_ratio
    }

    /// N-steps per interval.
    pub fn steps_per_interval(&self) -> usize {
        self.interval_ratio as usize
    }

    /// N-steps covered by the global-search lookahead.
    pub fn lookahead_steps(&self) -> usize {
        self.horizon.div_ceil(self.inner_interval.max(1)) as usize
    }

    /// `[c, m_M, k, k1, k2]`, the agent's initial metagoal parameters.
    pub fn numeric_params(&self) -> Vec<f64> {
        alloc::vec![
            self.contraction_factor,
            self.target_variation,
            self.drift_bound,
            self.meta_drift_bound,
            self.metric_drift_bound,
        ]
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        MetaGoalSpec { variant, ..self.clone() }
    }

    pub fn violations(&self) -> Vec<alloc::string::String> {
        use alloc::format;
        let mut v = Vec::new();
        let c = self.contraction_factor;
        if !(c > 0.0 && c < 1.0) {
            v.push(format!("metagoal.contraction_factor must lie in (0, 1), got {c}"));
        }
        if self.inner_interval == 0 {
            v.push("metagoal.inner_interval must be at least 1".into());
        }
        if self.interval_ratio == 0 {
            v.push("metagoal.interval_ratio must be at least 1".into());
        }
        for (name, x) in [
            ("target_variation", self.target_variation),
            ("drift_bound", self.drift_bound),
            ("meta_drift_bound", self.meta_drift_bound),
            ("metric_drift_bound", self.metric_drift_bound),
        ] {
            if !(x >= 0.0) || !x.is_finite() {
                v.push(format!("metagoal.{name} must be finite and nonnegative, got {x}"));
            }
        }
        let needs_horizon = self.variant.is_global() || self.variant == Variant::Hybrid;
        if needs_horizon && self.horizon <= self.inner_interval {
            v.push(format!(
                "metagoal.horizon must exceed inner_interval ({}) for {}",
                self.inner_interval, self.variant
            ));
        }
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
}

/// Goals, metagoal parameters and metric at one N-step boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub goals: GoalVector,
    pub metagoal_params: Vec<f64>,
    pub metric_params: MetricParams,
}

/// Most recent snapshots, oldest first, spaced by exactly `N` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalHistory {
    spacing: u64,
    capacity: usize,
    snapshots: VecDeque<Snapshot>,
}

pub const HISTORY_CAPACITY: usize = 4;

impl GoalHistory {
    pub fn new(spacing: u64) -> Self {
        GoalHistory {
            spacing,
            capacity: HISTORY_CAPACITY,
            snapshots: VecDeque::with_capacity(HISTORY_CAPACITY),
        }
    }

    pub fn spacing(&self) -> u64 {
        self.spacing
    }

    pub fn push(&mut self, s: Snapshot) -> Result<()> {
        if let Some(last) = self.snapshots.back() {
            if s.step != last.step + self.spacing {
                return Err(Error::Invalid(alloc::format!(
                    "snapshot at step {} does not follow step {} by {}",
                    s.step,
                    last.step,
                    self.spacing
                )));
            }
        }
        if self.snapshots.len() == self.capacity {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back(s);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// `back(0)` is the newest snapshot.
    pub fn back(&self, k: usize) -> Option<&Snapshot> {
        self.snapshots.len().checked_sub(k + 1).map(|i| &self.snapshots[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Snapshot> {
        self.snapshots.iter()
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.snapshots.len() < needed {
            return Err(Error::History {
                needed,
                available: self.snapshots.len(),
            });
        }
        Ok(())
    }

    /// Shifts every stored goal vector by `offset` (no clamping).
    pub fn translate(&mut self, offset: &[f64]) {
        for s in self.snapshots.iter_mut() {
            let moved: Vec<f64> = s.goals.coords().iter().zip(offset).map(|(g, o)| g + o).collect();
            s.goals = GoalVector::from_coords(moved);
        }
    }
}

/// Which part of the augmented state a report entry refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Goals,
    MetagoalParams,
    MetricParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub entries: Vec<(Component, bool)>,
}

impl ComponentReport {
    pub fn overall(&self) -> bool {
        self.entries.iter().all(|(_, ok)| *ok)
    }

    pub fn get(&self, c: Component) -> Option<bool> {
        self.entries.iter().find(|(k, _)| *k == c).map(|(_, ok)| *ok)
    }
}

pub type ContractionReport = ComponentReport;
pub type DriftReport = ComponentReport;

/// `new < c * prev`, or both effectively zero.
pub fn contracts(new: f64, prev: f64, c: f64) -> bool {
    (new <= STATIONARY_EPS && prev <= STATIONARY_EPS) || new < c * prev
}

/// `d(G(t+N), G(t)) < c * d(G(t), G(t-N))` under `m`, over the newest three snapshots.
pub fn check_goal_contraction(h: &GoalHistory, spec: &MetaGoalSpec, m: &MetricParams) -> Result<bool> {
    h.require(3)?;
    let (a, b, c) = (h.back(2).unwrap(), h.back(1).unwrap(), h.back(0).unwrap());
    let prev = m.distance(b.goals.coords(), a.goals.coords())?;
    let new = m.distance(c.goals.coords(), b.goals.coords())?;
    Ok(contracts(new, prev, spec.contraction_factor))
}

/// Metrics for the (goals, metagoal params, metric params) components.
/// Dynamic-metric checks measure with the agent's own metric at time `t`.
fn component_metrics(
    variant: Variant,
    base: &MetricParams,
    d_t: &MetricParams,
    meta_len: usize,
) -> (MetricParams, MetricParams, Option<MetricParams>) {
    match variant {
        Variant::GoalStabilityDynamicMetric => (d_t.clone(), d_t.canonical(meta_len), Some(d_t.lifted())),
        _ => (base.clone(), base.canonical(meta_len), None),
    }
}

fn slice_distance(m: &MetricParams, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    m.distance(a, b)
}

pub fn check_dynamic_contraction(h: &GoalHistory, spec: &MetaGoalSpec, base: &MetricParams) -> Result<ContractionReport> {
    if !spec.variant.is_dynamic() {
        return Err(Error::Mode(spec.variant.name().into()));
    }
    h.require(3)?;
    let (a, b, c) = (h.back(2).unwrap(), h.back(1).unwrap(), h.back(0).unwrap());
    let (gm, mm, km) = component_metrics(spec.variant, base, &b.metric_params, b.metagoal_params.len());
    let cf = spec.contraction_factor;
    let goals = contracts(
        gm.distance(c.goals.coords(), b.goals.coords())?,
        gm.distance(b.goals.coords(), a.goals.coords())?,
        cf,
    );
    let meta = contracts(
        slice_distance(&mm, &c.metagoal_params, &b.metagoal_params)?,
        slice_distance(&mm, &b.metagoal_params, &a.metagoal_params)?,
        cf,
    );
    let mut entries = alloc::vec![(Component::Goals, goals), (Component::MetagoalParams, meta)];
    if let Some(km) = km {
        let new = km.distance(&c.metric_params.flattened(), &b.metric_params.flattened())?;
        let prev = km.distance(&b.metric_params.flattened(), &a.metric_params.flattened())?;
        entries.push((Component::MetricParams, contracts(new, prev, cf)));
    }
    Ok(ComponentReport { entries })
}

/// Moves `proposal` toward `center` so that its distance is at most
/// `radius`; coordinates stay between the two endpoints.
pub fn project_into_ball(center: &[f64], proposal: &[f64], radius: f64, m: &MetricParams) -> Vec<f64> {
    let d = m.distance_unchecked(proposal, center);
    if d <= radius {
        return proposal.to_vec();
    }
    if radius <= 0.0 || !d.is_finite() {
        return center.to_vec();
    }
    let t = radius / d;
    center
        .iter()
        .zip(proposal)
        .map(|(g, p)| {
            let x = g + t * (p - g);
            x.clamp(g.min(*p), g.max(*p))
        })
        .collect()
}

/// Keeps `proposal` if it already contracts, otherwise pulls it back
/// radially toward `current` to just inside `c * prev`. Falls back to
/// `current` when rounding defeats the projection.
fn enforce_slice(current: &[f64], proposal: &[f64], prev: f64, c: f64, m: &MetricParams) -> Vec<f64> {
    if current.is_empty() {
        return Vec::new();
    }
    if prev <= STATIONARY_EPS {
        return current.to_vec();
    }
    let new = m.distance_unchecked(proposal, current);
    if contracts(new, prev, c) {
        return proposal.to_vec();
    }
    let x = project_into_ball(current, proposal, (1.0 - PROJECTION_MARGIN) * c * prev, m);
    if contracts(m.distance_unchecked(&x, current), prev, c) {
        x
    } else {
        current.to_vec()
    }
}

/// Radial projection of a proposed goal vector onto the contraction ball
/// around the newest snapshot.
pub fn enforce_contraction(
    proposed: &GoalVector,
    h: &GoalHistory,
    spec: &MetaGoalSpec,
    m: &MetricParams,
) -> Result<GoalVector> {
    h.require(2)?;
    let (p, g) = (h.back(1).unwrap(), h.back(0).unwrap());
    if proposed.dim() != g.goals.dim() || m.dim() != g.goals.dim() {
        return Err(Error::dim(g.goals.dim(), proposed.dim()));
    }
    let prev = m.distance(g.goals.coords(), p.goals.coords())?;
    Ok(GoalVector::from_coords(enforce_slice(
        g.goals.coords(),
        proposed.coords(),
        prev,
        spec.contraction_factor,
        m,
    )))
}

/// Component-wise enforcement for the dynamic variants, using the same
/// metrics as [`check_dynamic_contraction`].
pub fn enforce_dynamic_contraction(
    proposed: (&GoalVector, &[f64], &MetricParams),
    h: &GoalHistory,
    spec: &MetaGoalSpec,
    base: &MetricParams,
) -> Result<(GoalVector, Vec<f64>, MetricParams)> {
    h.require(2)?;
    let (p, g) = (h.back(1).unwrap(), h.back(0).unwrap());
    let (gm, mm, km) = component_metrics(spec.variant, base, &g.metric_params, g.metagoal_params.len());
    let c = spec.contraction_factor;
    let goals = enforce_slice(
        g.goals.coords(),
        proposed.0.coords(),
        gm.distance(g.goals.coords(), p.goals.coords())?,
        c,
        &gm,
    );
    let meta = enforce_slice(
        &g.metagoal_params,
        proposed.1,
        slice_distance(&mm, &g.metagoal_params, &p.metagoal_params)?,
        c,
        &mm,
    );
    let metric = match km {
        Some(km) if spec.variant.mutates_metric() => {
            let cur = g.metric_params.flattened();
            let prev = km.distance(&cur, &p.metric_params.flattened())?;
            let flat = enforce_slice(&cur, &proposed.2.flattened(), prev, c, &km);
            MetricParams::from_flattened(&flat).unwrap_or_else(|_| g.metric_params.clone())
        }
        _ => g.metric_params.clone(),
    };
    Ok((GoalVector::from_coords(goals), meta, metric))
}

/// `|mpv_now - m_M| < c * |mpv_prev - m_M|`, or both gaps effectively zero.
pub fn check_moderated_contraction(mpv_now: f64, mpv_prev: f64, spec: &MetaGoalSpec) -> bool {
    let m = spec.target_variation;
    contracts((mpv_now - m).abs(), (mpv_prev - m).abs(), spec.contraction_factor)
}

/// Inclusive drift bounds on the newest step: goals within `k`, and for
/// the dynamic global variant metagoal params within `k1` and metric
/// params within `k2`.
pub fn check_drift_bounds(h: &GoalHistory, spec: &MetaGoalSpec, m: &MetricParams) -> Result<DriftReport> {
    if !spec.variant.is_global() {
        return Err(Error::Mode(spec.variant.name().into()));
    }
    h.require(2)?;
    let (p, g) = (h.back(1).unwrap(), h.back(0).unwrap());
    drift_report(spec, m, (&p.goals, &p.metagoal_params, &p.metric_params), (&g.goals, &g.metagoal_params, &g.metric_params))
}

pub(crate) fn drift_report(
    spec: &MetaGoalSpec,
    m: &MetricParams,
    from: (&GoalVector, &[f64], &MetricParams),
    to: (&GoalVector, &[f64], &MetricParams),
) -> Result<DriftReport> {
    let goal = m.distance(to.0.coords(), from.0.coords())?;
    let mut entries = alloc::vec![(Component::Goals, goal <= spec.drift_bound)];
    if spec.variant == Variant::GlobalModeratedDynamic {
        let meta = slice_distance(&m.canonical(from.1.len()), to.1, from.1)?;
        let metric = crate::goalspace::metric_distance(to.2, from.2, &m.canonical(from.2.dim() + 1))?;
        entries.push((Component::MetagoalParams, meta <= spec.meta_drift_bound));
        entries.push((Component::MetricParams, metric <= spec.metric_drift_bound));
    }
    Ok(ComponentReport { entries })
}
