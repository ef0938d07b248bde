//! Built-in base objectives. The agent's internal parameters `theta`
//! pursue the minimizer of `J = |theta - G|^2 + coupling * V(theta, t)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::float::exp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Objective {
    /// `V = |theta - center|^2`.
    QuadraticWell {
        center: Vec<f64>,
        #[serde(default)]
        coupling: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// Quadratic well whose center moves at `velocity` per step, reflecting
    /// off the `[bounce_lo, bounce_hi]` box on each axis.
    MovingWell {
        center: Vec<f64>,
        velocity: Vec<f64>,
        bounce_lo: Vec<f64>,
        bounce_hi: Vec<f64>,
        #[serde(default)]
        coupling: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// `V = min(|theta - a|^2, |theta - b|^2)`.
    Bimodal {
        centers: [Vec<f64>; 2],
        #[serde(default)]
        coupling: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Triangle-wave reflection of `x` into `[lo, hi]`.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    let period = 2.0 * w;
    let mut t = (x - lo) % period;
    if t < 0.0 {
        t += period;
    }
    if t > w {
        lo + period - t
    } else {
        lo + t
    }
}

impl Objective {
    pub fn coupling(&self) -> f64 {
        match self {
            Objective::QuadraticWell { coupling, .. }
            | Objective::MovingWell { coupling, .. }
            | Objective::Bimodal { coupling, .. } => *coupling,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            Objective::QuadraticWell { scale, .. } | Objective::MovingWell { scale, .. } | Objective::Bimodal { scale, .. } => {
                *scale
            }
        }
    }

    /// Environment well centers at step `t`.
    pub fn wells(&self, t: u64) -> Vec<Vec<f64>> {
        match self {
            Objective::QuadraticWell { center, .. } => alloc::vec![center.clone()],
            Objective::MovingWell {
                center,
                velocity,
                bounce_lo,
                bounce_hi,
                ..
            } => alloc::vec![center
                .iter()
                .enumerate()
                .map(|(i, c)| reflect(c + velocity[i] * t as f64, bounce_lo[i], bounce_hi[i]))
                .collect()],
            Objective::Bimodal { centers, .. } => centers.to_vec(),
        }
    }

    /// Environment potential `V(theta, t)`.
    pub fn potential(&self, theta: &[f64], t: u64) -> f64 {
        self.wells(t)
            .iter()
            .map(|w| sq_dist(theta, w))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn value(&self, theta: &[f64], goals: &[f64], t: u64) -> f64 {
        sq_dist(theta, goals) + self.coupling() * self.potential(theta, t)
    }

    /// Exact minimizer of `J` over `theta` for fixed goals.
    pub fn optimum(&self, goals: &[f64], t: u64) -> Vec<f64> {
        let k = self.coupling();
        self.wells(t)
            .into_iter()
            .map(|w| -> Vec<f64> { goals.iter().zip(&w).map(|(g, c)| (g + k * c) / (1.0 + k)).collect() })
            .min_by(|a, b| self.value(a, goals, t).total_cmp(&self.value(b, goals, t)))
            .unwrap_or_else(|| goals.to_vec())
    }

    /// `exp(-J / scale)`, in `(0, 1]`.
    pub fn satisfaction(&self, theta: &[f64], goals: &[f64], t: u64) -> f64 {
        exp(-self.value(theta, goals, t) / self.scale()).clamp(0.0, 1.0)
    }

    pub(crate) fn violations(&self, n: usize, v: &mut Vec<String>) {
        let mut vec_dim = |name: &str, len: usize| {
            if len != n {
                v.push(format!("objective.{name} has {len} entries, goal_dim is {n}"));
            }
        };
        match self {
            Objective::QuadraticWell { center, .. } => vec_dim("center", center.len()),
            Objective::MovingWell {
                center,
                velocity,
                bounce_lo,
                bounce_hi,
                ..
            } => {
                vec_dim("center", center.len());
                vec_dim("velocity", velocity.len());
                vec_dim("bounce_lo", bounce_lo.len());
                vec_dim("bounce_hi", bounce_hi.len());
            }
            Objective::Bimodal { centers, .. } => {
                vec_dim("centers[0]", centers[0].len());
                vec_dim("centers[1]", centers[1].len());
            }
        }
        if let Objective::MovingWell { bounce_lo, bounce_hi, .. } = self {
            if bounce_lo.iter().zip(bounce_hi).any(|(l, h)| !(l < h)) {
                v.push("objective.bounce_lo must be below bounce_hi".into());
            }
        }
        let k = self.coupling();
        if !(k >= 0.0 && k.is_finite()) {
            v.push(format!("objective.coupling must be finite and nonnegative, got {k}"));
        }
        let s = self.scale();
        if !(s > 0.0 && s.is_finite()) {
            v.push(format!("objective.scale must be positive, got {s}"));
        }
    }
}
