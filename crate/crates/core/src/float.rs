//! Float helpers backed by `libm` so the crate builds without `std`.

pub(crate) use libm::{ceil, cos, exp, fabs as abs, floor, pow, sin, sqrt};

/// Euclidean norm of `a - b`.
pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
