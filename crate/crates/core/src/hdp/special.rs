//! Expectations under Beta and Dirichlet variational factors.

pub(crate) use statrs::function::gamma::{digamma, ln_gamma};

/// `E[log σ_k]` for a truncated stick-breaking construction whose first
/// `a.len()` proportions are `Beta(a_k, b_k)` and whose last proportion is 1.
/// The result has `a.len() + 1` entries.
pub(crate) fn expect_log_sticks(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    let mut out = Vec::with_capacity(a.len() + 1);
    let mut rest = 0.0;
    for (&ak, &bk) in a.iter().zip(b) {
        let total = digamma(ak + bk);
        out.push(digamma(ak) - total + rest);
        rest += digamma(bk) - total;
    }
    out.push(rest);
    out
}

/// Stick-breaking weights from expected proportions `a/(a+b)`; the last stick
/// takes whatever mass remains.
pub(crate) fn expected_stick_weights(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + 1);
    let mut remaining = 1.0;
    for (&ak, &bk) in a.iter().zip(b) {
        let p = ak / (ak + bk);
        out.push(p * remaining);
        remaining *= 1.0 - p;
    }
    out.push(remaining);
    out
}

/// In-place softmax of log-weights; returns the log normaliser.
pub(crate) fn log_normalize(values: &mut [f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    let log_norm = max + sum.ln();
    for v in values.iter_mut() {
        *v = (*v - log_norm).exp();
    }
    log_norm
}

/// `x ln x` with the `0 ln 0 = 0` convention.
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}
