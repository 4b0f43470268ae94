use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::special::{digamma, expect_log_sticks, expected_stick_weights};
use super::Hyperparams;
use crate::error::{Error, Result};

/// Scale of the Gamma(1, 1) noise added to `eta` when a model is created.
const INIT_NOISE_SCALE: f64 = 0.01;

/// Category-level variational state of one local HDP.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryModel {
    pub(super) lambda: Array2<f64>,
    pub(super) u: Vec<f64>,
    pub(super) v: Vec<f64>,
    pub(super) t0: u64,
    pub(super) doc_count: u64,
    pub(super) hyper: Hyperparams,
}

/// Expected top-level topic weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StickWeights(pub Vec<f64>);

impl StickWeights {
    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

impl CategoryModel {
    /// Fresh model: `lambda = eta + 0.01 * Gamma(1, 1)`, `u = 1`, `v = gamma`,
    /// `t0 = 1` and no documents.
    pub fn new(hyper: Hyperparams, dictionary_size: usize, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if dictionary_size == 0 {
            return Err(Error::Parameter("dictionary size must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Gamma::new(1.0, 1.0).expect("valid gamma parameters");
        let lambda = Array2::from_shape_simple_fn((hyper.max_topics, dictionary_size), || {
            hyper.eta + INIT_NOISE_SCALE * noise.sample(&mut rng)
        });
        let sticks = hyper.max_topics - 1;
        Ok(Self {
            lambda,
            u: vec![1.0; sticks],
            v: vec![hyper.gamma; sticks],
            t0: 1,
            doc_count: 0,
            hyper,
        })
    }

    /// Reassembles a model from stored parameters, checking shapes and positivity.
    pub fn from_parts(
        hyper: Hyperparams,
        lambda: Array2<f64>,
        u: Vec<f64>,
        v: Vec<f64>,
        t0: u64,
        doc_count: u64,
    ) -> Result<Self> {
        hyper.validate()?;
        let (k, vocab) = lambda.dim();
        if k != hyper.max_topics {
            return Err(Error::Structural {
                what: "lambda rows",
                expected: hyper.max_topics,
                actual: k,
            });
        }
        if vocab == 0 {
            return Err(Error::Parameter("dictionary size must be at least 1".into()));
        }
        for (what, vec) in [("u", &u), ("v", &v)] {
            if vec.len() != k - 1 {
                return Err(Error::Structural {
                    what,
                    expected: k - 1,
                    actual: vec.len(),
                });
            }
        }
        let positive = |x: &f64| *x > 0.0 && x.is_finite();
        if !lambda.iter().all(positive) || !u.iter().all(positive) || !v.iter().all(positive) {
            return Err(Error::Validation("model parameters must be finite and positive".into()));
        }
        if t0 == 0 {
            return Err(Error::Validation("update counter must be ≥ 1".into()));
        }
        Ok(Self {
            lambda,
            u,
            v,
            t0,
            doc_count,
            hyper,
        })
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn lambda(&self) -> &Array2<f64> {
        &self.lambda
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn t0(&self) -> u64 {
        self.t0
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    pub fn dictionary_size(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn num_topics(&self) -> usize {
        self.lambda.nrows()
    }

    /// `|c|` as used by the gradient and bound: the document count, at least 1.
    pub fn effective_doc_count(&self) -> f64 {
        self.doc_count.max(1) as f64
    }

    /// Row-normalised `lambda`: the posterior-mean word distribution per topic.
    pub fn expected_topics(&self) -> Array2<f64> {
        let mut topics = self.lambda.clone();
        for mut row in topics.axis_iter_mut(Axis(0)) {
            let total = row.sum();
            row.mapv_inplace(|x| x / total);
        }
        topics
    }

    /// `E[log beta_kw]` for the listed words, shape `words.len() × K`.
    pub(super) fn expected_log_topics(&self, words: &[usize]) -> Array2<f64> {
        let k = self.num_topics();
        let row_digamma: Vec<f64> = self.lambda.axis_iter(Axis(0)).map(|r| digamma(r.sum())).collect();
        Array2::from_shape_fn((words.len(), k), |(i, topic)| {
            digamma(self.lambda[(topic, words[i])]) - row_digamma[topic]
        })
    }

    /// `E[log sigma_k]` for the K top-level weights.
    pub(super) fn expected_log_sticks(&self) -> Vec<f64> {
        expect_log_sticks(&self.u, &self.v)
    }

    /// Stick-breaking weights from `E[beta'_k] = u_k / (u_k + v_k)`, the last
    /// topic taking the remainder.
    pub fn stick_weights(&self) -> StickWeights {
        StickWeights(expected_stick_weights(&self.u, &self.v))
    }

    /// Number of topics whose expected stick weight exceeds `mass_threshold`.
    pub fn effective_topic_count(&self, mass_threshold: f64) -> Result<usize> {
        if !(mass_threshold > 0.0 && mass_threshold < 1.0) {
            return Err(Error::Parameter(format!(
                "mass threshold must lie in (0, 1), got {mass_threshold}"
            )));
        }
        Ok(self.stick_weights().0.iter().filter(|&&w| w > mass_threshold).count())
    }
}
