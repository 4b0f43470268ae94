//! Synthetic corpora with planted topics, for tests, demos and benchmarks.
//!
//! Every category owns `topics_per_category` topics; topic `j` of category
//! `c` is uniform over its own block of `words_per_topic` consecutive word
//! ids, and no two topics share a word unless the vocabulary is too small to
//! hold them all (then blocks wrap around). A document draws its topic
//! proportions from a symmetric Dirichlet and then its words.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{BowDocument, CategoryLabel, LabeledCorpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlantedTopics {
    pub categories: usize,
    pub topics_per_category: usize,
    pub words_per_topic: usize,
    pub dictionary_size: usize,
    pub docs_per_category: usize,
    pub words_per_doc: usize,
    /// Symmetric Dirichlet concentration of per-document topic proportions.
    pub mixture_concentration: f64,
    pub seed: u64,
}

impl Default for PlantedTopics {
    fn default() -> Self {
        Self {
            categories: 3,
            topics_per_category: 3,
            words_per_topic: 5,
            dictionary_size: 50,
            docs_per_category: 20,
            words_per_doc: 60,
            mixture_concentration: 0.5,
            seed: 0,
        }
    }
}

impl PlantedTopics {
    /// Word ids of topic `topic` of category `category`.
    pub fn topic_words(&self, category: usize, topic: usize) -> Vec<u32> {
        let block = category * self.topics_per_category + topic;
        (0..self.words_per_topic)
            .map(|i| ((block * self.words_per_topic + i) % self.dictionary_size) as u32)
            .collect()
    }

    pub fn label(&self, category: usize) -> CategoryLabel {
        CategoryLabel::new(format!("cat{category:02}")).expect("generated labels are valid")
    }

    /// Documents are emitted category by category.
    pub fn generate(&self) -> Result<LabeledCorpus> {
        if self.categories == 0 || self.topics_per_category == 0 || self.words_per_topic == 0 {
            return Err(Error::Config("planted corpus needs categories, topics and words".into()));
        }
        if self.dictionary_size == 0 || self.words_per_doc == 0 {
            return Err(Error::Config("planted corpus needs a vocabulary and non-empty documents".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut corpus = LabeledCorpus::new(self.dictionary_size);
        for category in 0..self.categories {
            let topics: Vec<Vec<u32>> = (0..self.topics_per_category)
                .map(|t| self.topic_words(category, t))
                .collect();
            for index in 0..self.docs_per_category {
                let proportions = dirichlet_draw(&mut rng, self.mixture_concentration, self.topics_per_category)?;
                let words = (0..self.words_per_doc).map(|_| {
                    let topic = pick(&proportions, rng.random::<f64>());
                    let words = &topics[topic];
                    words[rng.random_range(0..words.len())]
                });
                let words: Vec<u32> = words.collect();
                let doc = BowDocument::from_words(words, format!("cat{category:02}/view{index:03}"));
                corpus.push(doc, self.label(category))?;
            }
        }
        Ok(corpus)
    }
}

/// Symmetric Dirichlet sample via normalised Gamma draws.
fn dirichlet_draw<R: Rng>(rng: &mut R, concentration: f64, dim: usize) -> Result<Vec<f64>> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::Config(format!("bad mixture concentration {concentration}: {e}")))?;
    let mut draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter_mut().for_each(|x| *x /= total);
    } else {
        draws = vec![1.0 / dim as f64; dim];
    }
    Ok(draws)
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
