//! Small numerical helpers shared across modules.

use std::f64::consts::PI;

/// Smallest probability passed to a logarithm; `0·log 0` evaluates to 0.
pub const PROB_FLOOR: f64 = 1e-300;

/// `log Σ exp(v_i)`; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log Σ_{i ∈ idx} exp(v_i)`.
pub fn log_sum_exp_indexed(values: &[f64], idx: &[usize]) -> f64 {
    let max = idx
        .iter()
        .map(|&i| values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = idx.iter().map(|&i| (values[i] - max).exp()).sum();
    max + sum.ln()
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Log density of `N(x | mean, variance)`; `variance` must be positive.
pub fn log_normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * variance).ln() - 0.5 * d * d / variance
}

/// `p·log p` with the continuous extension at 0, for `p` given by its log.
#[inline]
pub fn plogp_from_log(log_p: f64) -> f64 {
    let lp = log_p.max(PROB_FLOOR.ln());
    lp.exp() * lp
}
