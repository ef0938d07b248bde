use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float::ceil;
use crate::rng::{self, purpose};
use crate::simulator::{step_interval, Agent, ScenarioConfig};

/// Index of the `q` order statistic in a sorted sample of size `len`:
/// `ceil(q * len) - 1`.
pub fn quantile_index(q: f64, len: usize) -> usize {
    let k = ceil(q * len as f64) as usize;
    k.clamp(1, len) - 1
}

/// The `quantile` order statistic, over `ensemble` seeded rollouts of
/// `horizon` N-steps, of the largest pairwise goal distance seen within a
/// rollout (start included), under the agent's current metric.
pub fn max_plausible_variation(
    cfg: &ScenarioConfig,
    agent: &Agent,
    horizon: usize,
    ensemble: usize,
    quantile: f64,
    seed: u64,
) -> Result<f64> {
    if ensemble == 0 {
        return Err(Error::invalid("ensemble must hold at least one rollout"));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::Range(alloc::format!("quantile {quantile} outside (0, 1]")));
    }
    let metric = &agent.state.metric_params;
    let mut spans = Vec::with_capacity(ensemble);
    for e in 0..ensemble {
        let mut a = agent.clone();
        let mut r = rng::stream(seed, purpose::MPV, e as u64);
        let mut points = Vec::with_capacity(horizon + 1);
        points.push(a.goals().to_vec());
        for _ in 0..horizon {
            step_interval(&mut a, cfg, &mut r)?;
            points.push(a.goals().to_vec());
        }
        let mut span: f64 = 0.0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                span = span.max(metric.distance_unchecked(&points[i], &points[j]));
            }
        }
        spans.push(span);
    }
    spans.sort_by(f64::total_cmp);
    Ok(spans[quantile_index(quantile, ensemble)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistic_index() {
        assert_eq!(quantile_index(0.95, 64), 60);
        assert_eq!(quantile_index(1.0, 64), 63);
        assert_eq!(quantile_index(0.5, 2), 0);
        assert_eq!(quantile_index(1e-9, 10), 0);
        assert_eq!(quantile_index(0.95, 1), 0);
    }
}
