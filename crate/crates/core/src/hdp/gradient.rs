//! Natural gradients of the category-level parameters and the stochastic update.

use ndarray::{Array2, Zip};

use super::document::{DocContext, DocumentVariational};
use super::learning_rate;
use super::model::CategoryModel;
use crate::corpus::BowDocument;
use crate::error::{Error, Result};

/// Natural gradients for `lambda` (K × V) and the K − 1 stick parameters `u`, `v`.
///
/// Each has the form `target - current`, so a step of size 1 lands exactly
/// on the target.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalGradients {
    pub lambda: Array2<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl CategoryModel {
    /// ```text
    /// dlambda_kw = -lambda_kw + eta   + |c| sum_t phi_tk sum_n zeta_nt [w_n = w]
    /// du_k       = -u_k       + 1     + |c| sum_t phi_tk
    /// dv_k       = -v_k       + gamma + |c| sum_t sum_{l>k} phi_tl
    /// ```
    pub fn natural_gradients(&self, var: &DocumentVariational, doc: &BowDocument) -> Result<NaturalGradients> {
        let k = self.num_topics();
        let tables = self.hyper.max_tables;
        let words: Vec<_> = doc.iter().collect();
        check_dim("phi rows", tables, var.phi.nrows())?;
        check_dim("phi columns", k, var.phi.ncols())?;
        check_dim("zeta rows", words.len(), var.zeta.nrows())?;
        check_dim("zeta columns", tables, var.zeta.ncols())?;
        if var.words.len() != words.len() || var.words.iter().zip(&words).any(|(a, (b, _))| a != b) {
            return Err(Error::Validation(
                "document variational state does not belong to this document".into(),
            ));
        }
        if let Some(w) = doc.max_word() {
            check_dim("vocabulary", self.dictionary_size(), self.dictionary_size().max(w.index() + 1))?;
        }

        let scale = self.effective_doc_count();
        let eta = self.hyper.eta;
        let mut d_lambda = self.lambda.mapv(|x| eta - x);
        // (word, topic): sum_t zeta_it phi_tk
        let word_topic = var.zeta.dot(&var.phi);
        for (i, &(word, count)) in words.iter().enumerate() {
            let n = f64::from(count);
            for topic in 0..k {
                d_lambda[(topic, word.index())] += scale * n * word_topic[(i, topic)];
            }
        }

        let topic_tables: Vec<f64> = (0..k).map(|topic| var.phi.column(topic).sum()).collect();
        let mut d_u = Vec::with_capacity(k - 1);
        let mut d_v = Vec::with_capacity(k - 1);
        let mut tail: f64 = topic_tables.iter().sum();
        for topic in 0..k - 1 {
            tail -= topic_tables[topic];
            d_u.push(-self.u[topic] + 1.0 + scale * topic_tables[topic]);
            d_v.push(-self.v[topic] + self.hyper.gamma + scale * tail.max(0.0));
        }
        Ok(NaturalGradients {
            lambda: d_lambda,
            u: d_u,
            v: d_v,
        })
    }

    /// `param += rho * gradient` for every category-level parameter, then
    /// advances the update counter. Fails without modifying the model when
    /// `rho` is outside `(0, 1]` or an updated entry would be non-positive.
    pub fn apply_update(&mut self, grads: &NaturalGradients, rho: f64) -> Result<()> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Parameter(format!("step size must lie in (0, 1], got {rho}")));
        }
        check_dim("lambda gradient rows", self.lambda.nrows(), grads.lambda.nrows())?;
        check_dim("lambda gradient columns", self.lambda.ncols(), grads.lambda.ncols())?;
        check_dim("u gradient", self.u.len(), grads.u.len())?;
        check_dim("v gradient", self.v.len(), grads.v.len())?;

        let mut lambda = self.lambda.clone();
        Zip::from(&mut lambda).and(&grads.lambda).for_each(|x, &g| *x += rho * g);
        let step = |cur: &[f64], g: &[f64]| -> Vec<f64> { cur.iter().zip(g).map(|(x, d)| x + rho * d).collect() };
        let u = step(&self.u, &grads.u);
        let v = step(&self.v, &grads.v);

        for (name, ok) in [
            ("lambda", lambda.iter().all(|x| *x > 0.0 && x.is_finite())),
            ("u", u.iter().all(|x| *x > 0.0 && x.is_finite())),
            ("v", v.iter().all(|x| *x > 0.0 && x.is_finite())),
        ] {
            if !ok {
                return Err(Error::Numerical {
                    quantity: format!("updated {name} (entries must stay positive)"),
                });
            }
        }
        self.lambda = lambda;
        self.u = u;
        self.v = v;
        self.t0 += 1;
        Ok(())
    }

    /// One online step on a new training document: count it, infer its
    /// document-level state, and move the category parameters along the
    /// natural gradient with step `(tau0 + t0)^-kappa`.
    ///
    /// Returns the per-document bound computed before the update. The model
    /// is left untouched if any stage fails.
    pub fn fit_document(&mut self, doc: &BowDocument) -> Result<f64> {
        let mut next = self.clone();
        next.doc_count += 1;
        let fitted = DocContext::new(&next, doc, true)?.fit(next.hyper.doc_tol, next.hyper.doc_max_iters)?;
        let grads = next.natural_gradients(&fitted.var, doc)?;
        let rho = learning_rate(&next.hyper, next.t0);
        next.apply_update(&grads, rho)?;
        *self = next;
        Ok(fitted.bound)
    }
}

fn check_dim(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Structural { what, expected, actual })
    }
}
