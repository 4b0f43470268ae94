//! Reference implementations used as test oracles. They are written from the
//! model definition with plain per-token loops and share no code with the
//! library's inference routines.
#![allow(dead_code)]

use localhdp::corpus::{BowDocument, CategoryLabel, LabeledCorpus, VisualWordId};
use localhdp::hdp::{CategoryModel, DocumentVariational, Hyperparams};
use ndarray::Array2;
use rand::Rng;
use statrs::function::gamma::{digamma, ln_gamma};

/// Every token of the document, in word order.
pub fn tokens(doc: &BowDocument) -> Vec<usize> {
    let mut out = Vec::new();
    for (w, c) in doc.iter() {
        for _ in 0..c {
            out.push(w.index());
        }
    }
    out
}

/// Row of `zeta` for a token.
fn zeta_row(var: &DocumentVariational, word: usize) -> usize {
    var.words.iter().position(|w| w.index() == word).expect("token word in variational state")
}

fn scale(model: &CategoryModel) -> f64 {
    (model.doc_count().max(1)) as f64
}

/// Natural gradients by direct summation over tokens, tables and topics.
pub fn naive_gradients(model: &CategoryModel, var: &DocumentVariational, doc: &BowDocument) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let h = model.hyper();
    let (k_max, vocab) = model.lambda().dim();
    let t_max = h.max_tables;
    let c = scale(model);
    let toks = tokens(doc);
    let mut dl = Array2::zeros((k_max, vocab));
    for k in 0..k_max {
        for w in 0..vocab {
            let mut s = 0.0;
            for t in 0..t_max {
                let mut inner = 0.0;
                for &tok in &toks {
                    if tok == w {
                        inner += var.zeta[(zeta_row(var, tok), t)];
                    }
                }
                s += var.phi[(t, k)] * inner;
            }
            dl[(k, w)] = -model.lambda()[(k, w)] + h.eta + c * s;
        }
    }
    let mut du = Vec::new();
    let mut dv = Vec::new();
    for k in 0..k_max - 1 {
        let mut su = 0.0;
        let mut sv = 0.0;
        for t in 0..t_max {
            su += var.phi[(t, k)];
            for l in k + 1..k_max {
                sv += var.phi[(t, l)];
            }
        }
        du.push(-model.u()[k] + 1.0 + c * su);
        dv.push(-model.v()[k] + h.gamma + c * sv);
    }
    (dl, du, dv)
}

/// `E[log x]` and `E[log (1 - x)]` for `x ~ Beta(a, b)`.
fn beta_logs(a: f64, b: f64) -> (f64, f64) {
    (digamma(a) - digamma(a + b), digamma(b) - digamma(a + b))
}

/// `E[log w_i]` for stick-breaking weights with Beta(a_i, b_i) sticks; the
/// final weight takes the whole remainder.
pub fn stick_log_weights(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + 1;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = 0.0;
        for l in 0..i {
            s += beta_logs(a[l], b[l]).1;
        }
        if i < a.len() {
            s += beta_logs(a[i], b[i]).0;
        }
        out.push(s);
    }
    out
}

/// `E[log p(x)] - E[log q(x)]` for `x ~ q = Beta(a, b)`, prior Beta(1, conc).
fn beta_kl_term(a: f64, b: f64, conc: f64) -> f64 {
    let (el, el1m) = beta_logs(a, b);
    let log_prior = ln_gamma(1.0 + conc) - ln_gamma(conc) + (conc - 1.0) * el1m;
    let log_q = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * el + (b - 1.0) * el1m;
    log_prior - log_q
}

/// Category-level bound terms (not divided by `|c|`).
pub fn oracle_category_terms(model: &CategoryModel) -> f64 {
    let h = model.hyper();
    let (k_max, vocab) = model.lambda().dim();
    let mut total = 0.0;
    for k in 0..k_max - 1 {
        total += beta_kl_term(model.u()[k], model.v()[k], h.gamma);
    }
    for k in 0..k_max {
        let row: Vec<f64> = (0..vocab).map(|w| model.lambda()[(k, w)]).collect();
        let sum: f64 = row.iter().sum();
        let mut log_prior = ln_gamma(vocab as f64 * h.eta) - vocab as f64 * ln_gamma(h.eta);
        let mut log_q = ln_gamma(sum);
        for &l in &row {
            let el = digamma(l) - digamma(sum);
            log_prior += (h.eta - 1.0) * el;
            log_q += -ln_gamma(l) + (l - 1.0) * el;
        }
        total += log_prior - log_q;
    }
    total
}

/// `E[log beta_kw]` under the model's topic Dirichlets.
pub fn elog_topic(model: &CategoryModel, k: usize, w: usize) -> f64 {
    let row_sum: f64 = model.lambda().row(k).sum();
    digamma(model.lambda()[(k, w)]) - digamma(row_sum)
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// The per-document bound, including the category terms divided by `|c|`.
pub fn oracle_bound(model: &CategoryModel, doc: &BowDocument, var: &DocumentVariational) -> f64 {
    let h = model.hyper();
    let k_max = model.num_topics();
    let t_max = h.max_tables;
    let elog_sigma = stick_log_weights(model.u(), model.v());
    let elog_pi = stick_log_weights(&var.a, &var.b);
    let mut total = 0.0;
    for (&a, &b) in var.a.iter().zip(&var.b) {
        total += beta_kl_term(a, b, h.alpha0);
    }
    for t in 0..t_max {
        for k in 0..k_max {
            let p = var.phi[(t, k)];
            total += p * elog_sigma[k] - plogp(p);
        }
    }
    for tok in tokens(doc) {
        let row = zeta_row(var, tok);
        for t in 0..t_max {
            let z = var.zeta[(row, t)];
            let mut topic = 0.0;
            for k in 0..k_max {
                topic += var.phi[(t, k)] * elog_topic(model, k, tok);
            }
            total += z * (topic + elog_pi[t]) - plogp(z);
        }
    }
    total + oracle_category_terms(model) / scale(model)
}

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

pub fn random_model<R: Rng>(rng: &mut R, k: usize, t: usize, vocab: usize) -> CategoryModel {
    let hyper = Hyperparams {
        max_topics: k,
        max_tables: t,
        gamma: rng.random_range(0.3..3.0),
        alpha0: rng.random_range(0.3..3.0),
        eta: rng.random_range(0.05..2.0),
        ..Default::default()
    };
    let lambda = Array2::from_shape_simple_fn((k, vocab), || rng.random_range(0.05..5.0));
    let u = (0..k - 1).map(|_| rng.random_range(0.2..4.0)).collect();
    let v = (0..k - 1).map(|_| rng.random_range(0.2..4.0)).collect();
    let doc_count = rng.random_range(0..6);
    CategoryModel::from_parts(hyper, lambda, u, v, 1 + rng.random_range(0..10), doc_count).unwrap()
}

pub fn random_doc<R: Rng>(rng: &mut R, vocab: usize, max_tokens: usize) -> BowDocument {
    let n = rng.random_range(1..=max_tokens);
    BowDocument::from_words((0..n).map(|_| VisualWordId(rng.random_range(0..vocab as u32))), "random")
}

/// Row-stochastic variational state for `doc` with sticks consistent with zeta.
pub fn random_variational<R: Rng>(rng: &mut R, model: &CategoryModel, doc: &BowDocument) -> DocumentVariational {
    let t = model.hyper().max_tables;
    let k = model.num_topics();
    let words: Vec<VisualWordId> = doc.iter().map(|(w, _)| w).collect();
    let mut phi = Array2::zeros((t, k));
    for r in 0..t {
        for (c, p) in random_simplex(rng, k).into_iter().enumerate() {
            phi[(r, c)] = p;
        }
    }
    let mut zeta = Array2::zeros((words.len(), t));
    for r in 0..words.len() {
        for (c, p) in random_simplex(rng, t).into_iter().enumerate() {
            zeta[(r, c)] = p;
        }
    }
    DocumentVariational {
        words,
        a: (0..t - 1).map(|_| rng.random_range(0.5..5.0)).collect(),
        b: (0..t - 1).map(|_| rng.random_range(0.5..5.0)).collect(),
        phi,
        zeta,
    }
}

/// Categories over disjoint word blocks: every view of category `c` uses
/// only words `block*c .. block*(c+1)`.
pub fn separable_corpus(categories: usize, views: usize, block: usize) -> LabeledCorpus {
    let mut corpus = LabeledCorpus::new(categories * block);
    for c in 0..categories {
        for v in 0..views {
            let words = (0..12).map(|i| VisualWordId((c * block + (i * 7 + v * 3) % block) as u32));
            let doc = BowDocument::from_words(words, format!("c{c}/v{v}"));
            corpus.push(doc, CategoryLabel::new(format!("c{c}")).unwrap()).unwrap();
        }
    }
    corpus
}
