use alloc::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Variant;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_THETA_LOW: f64 = 0.25;

/// Scenario-level preconditions for the hybrid policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeasibilityFlags {
    pub compactness_ok: bool,
    pub continuity_ok: bool,
    pub convexity_ok: bool,
    pub survival_ok: bool,
    pub budget_ok: bool,
}

impl Default for FeasibilityFlags {
    fn default() -> Self {
        FeasibilityFlags {
            compactness_ok: true,
            continuity_ok: true,
            convexity_ok: true,
            survival_ok: true,
            budget_ok: true,
        }
    }
}

impl FeasibilityFlags {
    /// All 32 flag settings, bit order as the fields.
    pub fn enumerate() -> impl Iterator<Item = FeasibilityFlags> {
        (0u8..32).map(|b| FeasibilityFlags {
            compactness_ok: b & 1 != 0,
            continuity_ok: b & 2 != 0,
            convexity_ok: b & 4 != 0,
            survival_ok: b & 8 != 0,
            budget_ok: b & 16 != 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridPolicyState {
    pub current_mode: Variant,
    window: VecDeque<f64>,
    window_len: usize,
    theta_low: f64,
    pub flags: FeasibilityFlags,
}

impl HybridPolicyState {
    /// Starts in the mode the flags select before any satisfaction is seen.
    pub fn new(flags: FeasibilityFlags, window_len: usize, theta_low: f64) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::invalid("hybrid window must hold at least one interval"));
        }
        if !(0.0..=1.0).contains(&theta_low) {
            return Err(Error::Range(alloc::format!("theta_low {theta_low} outside [0, 1]")));
        }
        Ok(HybridPolicyState {
            current_mode: select(&flags, false),
            window: VecDeque::with_capacity(window_len),
            window_len,
            theta_low,
            flags,
        })
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn theta_low(&self) -> f64 {
        self.theta_low
    }

    fn miserable(&self) -> bool {
        self.window.len() == self.window_len
            && self.window.iter().sum::<f64>() / (self.window_len as f64) < self.theta_low
    }
}

fn select(flags: &FeasibilityFlags, miserable: bool) -> Variant {
    if !flags.survival_ok {
        Variant::Unconstrained
    } else if miserable {
        Variant::ModeratedEvolution
    } else if flags.compactness_ok && flags.continuity_ok && flags.convexity_ok && flags.budget_ok {
        Variant::GlobalModeratedDynamic
    } else if flags.budget_ok {
        Variant::GoalStabilityDynamicMeta
    } else {
        Variant::GoalStability
    }
}

/// Pushes one interval's satisfaction and picks the next mode.
pub fn hybrid_policy_step(ps: &HybridPolicyState, new_satisfaction: f64) -> Result<HybridPolicyState> {
    if !(0.0..=1.0).contains(&new_satisfaction) {
        return Err(Error::Range(alloc::format!("satisfaction {new_satisfaction} outside [0, 1]")));
    }
    let mut next = ps.clone();
    if next.window.len() == next.window_len {
        next.window.pop_front();
    }
    next.window.push_back(new_satisfaction);
    next.current_mode = select(&next.flags, next.miserable());
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(flags: FeasibilityFlags, s: f64, steps: usize) -> HybridPolicyState {
        let mut ps = HybridPolicyState::new(flags, DEFAULT_WINDOW, DEFAULT_THETA_LOW).unwrap();
        for _ in 0..steps {
            ps = hybrid_policy_step(&ps, s).unwrap();
        }
        ps
    }

    #[test]
    fn documented_examples() {
        let all = FeasibilityFlags::default();
        assert_eq!(run(all, 0.8, 20).current_mode, Variant::GlobalModeratedDynamic);
        assert_eq!(run(all, 0.1, 20).current_mode, Variant::ModeratedEvolution);
        let dying = FeasibilityFlags { survival_ok: false, ..all };
        assert_eq!(run(dying, 0.1, 20).current_mode, Variant::Unconstrained);
    }

    #[test]
    fn misery_needs_a_full_window() {
        let all = FeasibilityFlags::default();
        assert_eq!(run(all, 0.0, 19).current_mode, Variant::GlobalModeratedDynamic);
        assert_eq!(run(all, 0.0, 20).current_mode, Variant::ModeratedEvolution);
    }

    #[test]
    fn rejects_out_of_range() {
        let ps = HybridPolicyState::new(FeasibilityFlags::default(), 3, 0.25).unwrap();
        assert!(matches!(hybrid_policy_step(&ps, 1.5), Err(Error::Range(_))));
        assert!(hybrid_policy_step(&ps, f64::NAN).is_err());
    }
}
