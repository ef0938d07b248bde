//! Reference self-maps of the unit square used by tests, examples and the CLI.

use alloc::vec::Vec;

use crate::float::{cos, sin};

pub const MIDPOINT_TARGET: [f64; 2] = [0.3, 0.7];
pub const SPIRAL_CENTER: [f64; 2] = [0.45, 0.55];
pub const SPIRAL_SCALE: f64 = 0.55;
pub const SPIRAL_ANGLE: f64 = core::f64::consts::FRAC_PI_4;

pub fn identity(x: &[f64]) -> Vec<f64> {
    x.to_vec()
}

/// `(x + a) / 2`, fixed point `a`.
pub fn midpoint(x: &[f64]) -> Vec<f64> {
    x.iter().zip(MIDPOINT_TARGET).map(|(v, a)| 0.5 * (v + a)).collect()
}

/// Scaled rotation about a center point, fixed point at the center.
pub fn spiral(x: &[f64]) -> Vec<f64> {
    let [cx, cy] = SPIRAL_CENTER;
    let (dx, dy) = (x[0] - cx, x[1] - cy);
    let (s, c) = (sin(SPIRAL_ANGLE), cos(SPIRAL_ANGLE));
    alloc::vec![
        cx + SPIRAL_SCALE * (c * dx - s * dy),
        cy + SPIRAL_SCALE * (s * dx + c * dy),
    ]
}

/// `0.1 + 0.8 * 3x(1-x)` on each coordinate; image lies in `[0.1, 0.7]`.
pub fn logistic(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| 0.1 + 2.4 * v * (1.0 - v)).collect()
}

/// Positive root of `2.4x^2 - 1.4x - 0.1 = 0`.
pub fn logistic_fixed_point() -> f64 {
    (1.4 + libm::sqrt(1.4 * 1.4 + 4.0 * 2.4 * 0.1)) / 4.8
}

pub fn cosine(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| cos(*v)).collect()
}

pub type SuiteMap = fn(&[f64]) -> Vec<f64>;

/// The four continuous self-maps of `[0,1]^2` used to compare searches.
pub fn suite() -> [(&'static str, SuiteMap); 4] {
    [
        ("identity", identity),
        ("midpoint", midpoint),
        ("spiral", spiral),
        ("logistic", logistic),
    ]
}

pub fn by_name(name: &str) -> Option<SuiteMap> {
    match name {
        "cos" | "cosine" => Some(cosine),
        _ => suite().into_iter().find(|(n, _)| *n == name).map(|(_, f)| f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::float::euclid;

    #[test]
    fn stated_fixed_points() {
        assert_eq!(midpoint(&MIDPOINT_TARGET), MIDPOINT_TARGET.to_vec());
        assert!(euclid(&spiral(&SPIRAL_CENTER), &SPIRAL_CENTER) < 1e-15);
        let p = logistic_fixed_point();
        assert!((p - 0.647_667).abs() < 1e-6);
        assert!((logistic(&[p])[0] - p).abs() < 1e-15);
    }

    #[test]
    fn suite_maps_are_self_maps() {
        let n = 21;
        for (name, f) in suite() {
            for i in 0..n {
                for j in 0..n {
                    let x = [i as f64 / 20.0, j as f64 / 20.0];
                    let y = f(&x);
                    assert!(y.iter().all(|v| (0.0..=1.0).contains(v)), "{name} at {x:?}");
                }
            }
        }
    }
}
