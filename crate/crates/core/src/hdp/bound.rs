//! Evidence lower bound pieces.
//!
//! The per-document bound is
//!
//! ```text
//! L_j = E[log p(w_j | c_j, z_j, topics)] + E[log p(c_j | beta')] + E[log p(z_j | pi'_j)]
//!     + E[log p(pi'_j | alpha0)] + H(q(c_j)) + H(q(z_j)) + H(q(pi'_j))
//!     + (1/|c|) * (E[log p(beta')] + E[log p(topics)] + H(q(beta')) + H(q(topics)))
//! ```
//!
//! where the last line is shared by every document of the category.

use ndarray::{Array2, ArrayView1, Axis};

use super::model::CategoryModel;
use super::special::{digamma, expect_log_sticks, ln_gamma, xlogx};

/// Differential entropy of `Beta(a, b)`.
pub fn beta_entropy(a: f64, b: f64) -> f64 {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    ln_beta - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b)
}

/// Differential entropy of a Dirichlet with parameter vector `alpha`.
pub fn dirichlet_entropy(alpha: ArrayView1<'_, f64>) -> f64 {
    let total: f64 = alpha.sum();
    let dim = alpha.len() as f64;
    let ln_norm: f64 = alpha.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(total);
    let cross: f64 = alpha.iter().map(|&x| (x - 1.0) * digamma(x)).sum();
    ln_norm + (total - dim) * digamma(total) - cross
}

/// `E[log Beta(x; 1, conc)] + H(Beta(a, b))` summed over sticks, with `x ~ Beta(a, b)`.
fn stick_prior_plus_entropy(a: &[f64], b: &[f64], conc: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&ak, &bk)| {
            let e_log_1m = digamma(bk) - digamma(ak + bk);
            conc.ln() + (conc - 1.0) * e_log_1m + beta_entropy(ak, bk)
        })
        .sum()
}

/// The category-level part of the bound, not yet divided by `|c|`.
pub(super) fn category_terms(model: &CategoryModel) -> f64 {
    let hyper = model.hyper();
    let eta = hyper.eta;
    let vocab = model.dictionary_size() as f64;
    let sticks = stick_prior_plus_entropy(model.u(), model.v(), hyper.gamma);

    let prior_norm = ln_gamma(vocab * eta) - vocab * ln_gamma(eta);
    let topics: f64 = model
        .lambda()
        .axis_iter(Axis(0))
        .map(|row| {
            let row_dg = digamma(row.sum());
            let e_log_sum: f64 = row.iter().map(|&x| digamma(x) - row_dg).sum();
            prior_norm + (eta - 1.0) * e_log_sum + dirichlet_entropy(row)
        })
        .sum();
    sticks + topics
}

/// Per-document bound with `global` (already divided by `|c|`) added on.
///
/// `elog_topics` is `E[log beta_kw]` restricted to the document's distinct
/// words (rows), `elog_sigma` the top-level `E[log sigma_k]`.
#[allow(clippy::too_many_arguments)]
pub(super) fn document_bound(
    counts: &[f64],
    elog_topics: &Array2<f64>,
    elog_sigma: &[f64],
    alpha0: f64,
    zeta: &Array2<f64>,
    phi: &Array2<f64>,
    a: &[f64],
    b: &[f64],
    global: f64,
) -> f64 {
    let elog_pi = expect_log_sticks(a, b);
    // per (word, table): sum_k phi_tk E[log beta_kw]
    let word_table = elog_topics.dot(&phi.t());

    let mut words = 0.0;
    for (i, &n) in counts.iter().enumerate() {
        let mut s = 0.0;
        for (t, &z) in zeta.row(i).iter().enumerate() {
            if z > 0.0 {
                s += z * (word_table[(i, t)] + elog_pi[t]) - xlogx(z);
            }
        }
        words += n * s;
    }

    let mut tables = 0.0;
    for row in phi.rows() {
        for (k, &p) in row.iter().enumerate() {
            if p > 0.0 {
                tables += p * elog_sigma[k] - xlogx(p);
            }
        }
    }

    words + tables + stick_prior_plus_entropy(a, b, alpha0) + global
}
