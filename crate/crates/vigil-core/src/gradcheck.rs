//! Central finite-difference gradient oracle.
//!
//! Both trainable models expose a flat parameter vector; this module
//! differentiates any scalar loss of that vector numerically so analytic
//! gradients can be checked against an independent route.

use alloc::vec::Vec;

use crate::math;

/// Central differences: `(f(p + h e_i) - f(p - h e_i)) / 2h` per parameter.
pub fn central_difference<F>(mut f: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut scratch = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = scratch[i];
        scratch[i] = orig + h;
        let plus = f(&scratch);
        scratch[i] = orig - h;
        let minus = f(&scratch);
        scratch[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// Max over parameters of `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    debug_assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let denom = math::abs(a).max(math::abs(n)).max(1e-8);
        let err = math::abs(a - n) / denom;
        if err > worst {
            worst = err;
        }
    }
    worst
}
