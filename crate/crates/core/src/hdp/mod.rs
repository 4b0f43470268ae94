//! Single-category HDP trained by online variational inference.
//!
//! A [`CategoryModel`] holds the category-level variational parameters: a
//! Dirichlet `lambda` per topic (K × V) and Beta parameters `(u, v)` for the
//! K − 1 top-level stick proportions. Each incoming document is first fitted
//! with document-level coordinate ascent ([`CategoryModel::infer_document`])
//! with the category frozen, then its natural gradient is applied with a
//! decaying step size ([`CategoryModel::fit_document`]).
//!
//! Documents are processed one at a time; the document-level variational
//! state only ever lives for the duration of one call.

mod bound;
mod document;
mod gradient;
mod model;
pub(crate) mod special;

pub use bound::{beta_entropy, dirichlet_entropy};
pub use document::{DocumentInference, DocumentVariational};
pub use gradient::NaturalGradients;
pub use model::{CategoryModel, StickWeights};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model hyperparameters shared by every category of a registry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Corpus-level truncation: maximum number of topics per category.
    pub max_topics: usize,
    /// Document-level truncation: number of tables per document.
    pub max_tables: usize,
    /// Top-level stick concentration.
    pub gamma: f64,
    /// Document-level stick concentration.
    pub alpha0: f64,
    /// Symmetric Dirichlet prior on topics.
    pub eta: f64,
    /// Learning-rate offset, `> 0`.
    pub tau0: f64,
    /// Learning-rate exponent, in `(0.5, 1]`.
    pub kappa: f64,
    /// Relative bound change that stops document-level coordinate ascent.
    pub doc_tol: f64,
    /// Sweep cap for document-level coordinate ascent.
    pub doc_max_iters: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            max_topics: 100,
            max_tables: 20,
            gamma: 1.0,
            alpha0: 1.0,
            eta: 1.0,
            tau0: 1.0,
            kappa: 1.0,
            doc_tol: 1e-5,
            doc_max_iters: 100,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Parameter(msg));
        if self.max_topics < 1 || self.max_tables < 1 {
            return fail("truncation levels must be at least 1".into());
        }
        if self.max_tables > self.max_topics {
            return fail(format!(
                "table truncation T={} exceeds topic truncation K={}",
                self.max_tables, self.max_topics
            ));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return fail(format!("tau0 must be > 0, got {}", self.tau0));
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return fail(format!("kappa must lie in (0.5, 1], got {}", self.kappa));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return fail(format!("eta must be > 0, got {}", self.eta));
        }
        if !(self.gamma > 0.0 && self.alpha0 > 0.0 && self.gamma.is_finite() && self.alpha0.is_finite()) {
            return fail(format!(
                "concentrations must be > 0, got gamma={} alpha0={}",
                self.gamma, self.alpha0
            ));
        }
        if !(self.doc_tol >= 0.0) || self.doc_max_iters == 0 {
            return fail("document tolerance must be ≥ 0 and max iterations ≥ 1".into());
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

/// Step size `(tau0 + t0)^(-kappa)` for the `t0`-th processed document.
pub fn learning_rate(hyper: &Hyperparams, t0: u64) -> f64 {
    debug_assert!(t0 >= 1, "update counter starts at 1");
    (hyper.tau0 + t0 as f64).powf(-hyper.kappa)
}
