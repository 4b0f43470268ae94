//! Document-level coordinate ascent with the category parameters frozen.

use ndarray::Array2;

use super::bound::{category_terms, document_bound};
use super::model::CategoryModel;
use super::special::{expect_log_sticks, expected_stick_weights, log_normalize};
use crate::corpus::{BowDocument, VisualWordId};
use crate::error::{Error, Result};

/// Variational state of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentVariational {
    /// Distinct words of the document, in increasing order; row `i` of
    /// `zeta` belongs to `words[i]`.
    pub words: Vec<VisualWordId>,
    /// Beta parameters of the T − 1 document-level sticks.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Table-to-topic assignment probabilities, T × K.
    pub phi: Array2<f64>,
    /// Word-to-table assignment probabilities, distinct words × T.
    pub zeta: Array2<f64>,
}

impl DocumentVariational {
    /// Expected topic mixture of the document: `sum_t E[pi_t] phi_t`.
    pub fn topic_mixture(&self) -> Vec<f64> {
        let table_weights = expected_stick_weights(&self.a, &self.b);
        let mut mixture = vec![0.0; self.phi.ncols()];
        for (row, w) in self.phi.rows().into_iter().zip(table_weights) {
            for (m, &p) in mixture.iter_mut().zip(row.iter()) {
                *m += w * p;
            }
        }
        mixture
    }
}

#[derive(Debug, Clone)]
pub struct DocumentInference {
    pub var: DocumentVariational,
    /// Final per-document bound.
    pub bound: f64,
    /// Bound after initialisation and after every sweep.
    pub history: Vec<f64>,
}

impl DocumentInference {
    pub fn sweeps(&self) -> usize {
        self.history.len() - 1
    }
}

/// Frozen category quantities needed while fitting one document.
pub(super) struct DocContext {
    pub words: Vec<VisualWordId>,
    pub counts: Vec<f64>,
    /// `E[log beta_kw]`, distinct words × K.
    pub elog_topics: Array2<f64>,
    pub elog_sigma: Vec<f64>,
    pub alpha0: f64,
    pub tables: usize,
    /// Category-level terms divided by `|c|`.
    pub global: f64,
}

impl DocContext {
    pub(super) fn new(model: &CategoryModel, doc: &BowDocument, with_global: bool) -> Result<Self> {
        if doc.is_empty() {
            return Err(Error::Inference(format!(
                "document {} has no words",
                doc.source_id()
            )));
        }
        doc.validate(model.dictionary_size())?;
        let words: Vec<VisualWordId> = doc.iter().map(|(w, _)| w).collect();
        let counts = doc.iter().map(|(_, c)| f64::from(c)).collect();
        let indices: Vec<usize> = words.iter().map(|w| w.index()).collect();
        let global = if with_global {
            category_terms(model) / model.effective_doc_count()
        } else {
            0.0
        };
        if !global.is_finite() {
            return Err(Error::Numerical {
                quantity: "category-level bound terms".into(),
            });
        }
        Ok(Self {
            words,
            counts,
            elog_topics: model.expected_log_topics(&indices),
            elog_sigma: model.expected_log_sticks(),
            alpha0: model.hyper().alpha0,
            tables: model.hyper().max_tables,
            global,
        })
    }

    fn bound(&self, var: &DocumentVariational) -> f64 {
        document_bound(
            &self.counts,
            &self.elog_topics,
            &self.elog_sigma,
            self.alpha0,
            &var.zeta,
            &var.phi,
            &var.a,
            &var.b,
            self.global,
        )
    }

    /// Hard initial word-to-table assignment: each word goes with its best
    /// topic under the frozen model, and the resulting word groups fill the
    /// tables in order of decreasing size (the overflow shares the last table).
    fn initial_zeta(&self) -> Array2<f64> {
        let k = self.elog_sigma.len();
        let best: Vec<usize> = (0..self.words.len())
            .map(|i| {
                (0..k)
                    .map(|topic| (topic, self.elog_sigma[topic] + self.elog_topics[(i, topic)]))
                    .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
                    .0
            })
            .collect();

        let mut group_mass: Vec<(usize, f64)> = Vec::new();
        for (i, &topic) in best.iter().enumerate() {
            match group_mass.iter_mut().find(|(t, _)| *t == topic) {
                Some(entry) => entry.1 += self.counts[i],
                None => group_mass.push((topic, self.counts[i])),
            }
        }
        group_mass.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

        let mut zeta = Array2::zeros((self.words.len(), self.tables));
        for (i, topic) in best.iter().enumerate() {
            let rank = group_mass.iter().position(|(t, _)| t == topic).unwrap();
            zeta[(i, rank.min(self.tables - 1))] = 1.0;
        }
        zeta
    }

    fn update_sticks(&self, var: &mut DocumentVariational) {
        let tables = self.tables;
        let mut mass = vec![0.0; tables];
        for (i, &n) in self.counts.iter().enumerate() {
            for (t, m) in mass.iter_mut().enumerate() {
                *m += n * var.zeta[(i, t)];
            }
        }
        let mut tail = 0.0;
        for t in (0..tables - 1).rev() {
            tail += mass[t + 1];
            var.a[t] = 1.0 + mass[t];
            var.b[t] = self.alpha0 + tail;
        }
    }

    fn update_phi(&self, var: &mut DocumentVariational) -> Result<()> {
        // (table, topic): sum_i n_i zeta_it E[log beta_k,w_i]
        let mut weighted = var.zeta.clone();
        for (mut row, &n) in weighted.rows_mut().into_iter().zip(&self.counts) {
            row *= n;
        }
        let mut scores = weighted.t().dot(&self.elog_topics);
        for mut row in scores.rows_mut() {
            for (s, &e) in row.iter_mut().zip(&self.elog_sigma) {
                *s += e;
            }
            let norm = log_normalize(row.as_slice_mut().expect("standard layout"));
            if !norm.is_finite() {
                return Err(Error::Numerical {
                    quantity: "table-to-topic assignments (phi)".into(),
                });
            }
        }
        var.phi = scores;
        Ok(())
    }

    fn update_zeta(&self, var: &mut DocumentVariational) -> Result<()> {
        let elog_pi = expect_log_sticks(&var.a, &var.b);
        let mut scores = self.elog_topics.dot(&var.phi.t());
        for mut row in scores.rows_mut() {
            for (s, &e) in row.iter_mut().zip(&elog_pi) {
                *s += e;
            }
            let norm = log_normalize(row.as_slice_mut().expect("standard layout"));
            if !norm.is_finite() {
                return Err(Error::Numerical {
                    quantity: "word-to-table assignments (zeta)".into(),
                });
            }
        }
        var.zeta = scores;
        Ok(())
    }

    /// Runs coordinate ascent until the relative bound change drops below
    /// `tol` or `max_iters` sweeps have been made. Each sweep updates zeta,
    /// then the sticks (a, b), then phi; each step maximises the bound in its
    /// block, so the recorded history is non-decreasing up to rounding.
    pub(super) fn fit(&self, tol: f64, max_iters: usize) -> Result<DocumentInference> {
        let tables = self.tables;
        let mut var = DocumentVariational {
            words: self.words.clone(),
            a: vec![1.0; tables - 1],
            b: vec![self.alpha0; tables - 1],
            phi: Array2::zeros((tables, self.elog_sigma.len())),
            zeta: self.initial_zeta(),
        };
        self.update_sticks(&mut var);
        self.update_phi(&mut var)?;

        let mut bound = self.checked_bound(&var)?;
        let mut history = vec![bound];
        for _ in 0..max_iters {
            self.update_zeta(&mut var)?;
            self.update_sticks(&mut var);
            self.update_phi(&mut var)?;
            let next = self.checked_bound(&var)?;
            history.push(next);
            let change = (next - bound).abs() / bound.abs().max(f64::MIN_POSITIVE);
            bound = next;
            if change < tol {
                break;
            }
        }
        Ok(DocumentInference { var, bound, history })
    }

    fn checked_bound(&self, var: &DocumentVariational) -> Result<f64> {
        let bound = self.bound(var);
        if bound.is_finite() {
            Ok(bound)
        } else {
            Err(Error::Numerical {
                quantity: "per-document bound".into(),
            })
        }
    }
}

impl CategoryModel {
    /// Fits the document-level variational parameters of `doc` with the
    /// category frozen. The returned bound includes the category-level terms
    /// scaled by `1/|c|`.
    pub fn infer_document(&self, doc: &BowDocument, tol: f64, max_iters: usize) -> Result<DocumentInference> {
        DocContext::new(self, doc, true)?.fit(tol, max_iters)
    }

    /// [`infer_document`](Self::infer_document) with the tolerance and sweep
    /// cap from the model's hyperparameters.
    pub fn infer(&self, doc: &BowDocument) -> Result<DocumentInference> {
        self.infer_document(doc, self.hyper.doc_tol, self.hyper.doc_max_iters)
    }

    /// Sum of fresh per-document bounds over `docs`.
    pub fn category_bound(&self, docs: &[BowDocument]) -> Result<f64> {
        if docs.is_empty() {
            return Err(Error::Parameter("category bound needs at least one document".into()));
        }
        docs.iter().map(|d| self.infer(d).map(|r| r.bound)).sum()
    }

    /// Held-out predictive log-likelihood per word:
    /// `(1/N) sum_n log sum_k theta_k topic_k[w_n]` with `theta` the inferred
    /// topic mixture of the document.
    pub fn log_likelihood(&self, doc: &BowDocument) -> Result<f64> {
        if self.doc_count == 0 {
            return Err(Error::Inference(
                "cannot score against a category with no training documents".into(),
            ));
        }
        let ctx = DocContext::new(self, doc, false)?;
        let fitted = ctx.fit(self.hyper.doc_tol, self.hyper.doc_max_iters)?;
        let theta = fitted.var.topic_mixture();
        let topics = self.expected_topics();
        let mut total = 0.0;
        for (word, count) in doc.iter() {
            let p: f64 = theta
                .iter()
                .enumerate()
                .map(|(k, &th)| th * topics[(k, word.index())])
                .sum();
            total += f64::from(count) * p.ln();
        }
        let ll = total / doc.total_words() as f64;
        if ll.is_finite() {
            Ok(ll)
        } else {
            Err(Error::Numerical {
                quantity: format!("log-likelihood of document {}", doc.source_id()),
            })
        }
    }
}
