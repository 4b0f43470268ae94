//! Open-ended category store: one independent local HDP per label, grown by
//! teach/correct and queried by ask.

use std::collections::BTreeMap;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::corpus::{BowDocument, CategoryLabel};
use crate::error::{Error, Result};
use crate::hdp::{CategoryModel, Hyperparams};

/// A learned category: its model and every view it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    model: CategoryModel,
    instances: Vec<BowDocument>,
}

impl Category {
    pub fn model(&self) -> &CategoryModel {
        &self.model
    }

    pub fn instances(&self) -> &[BowDocument] {
        &self.instances
    }
}

/// Outcome of [`Registry::ask`].
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: CategoryLabel,
    /// Per-word held-out log-likelihood under each category.
    pub scores: BTreeMap<CategoryLabel, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    dictionary_size: usize,
    hyper: Hyperparams,
    seed: u64,
    categories: BTreeMap<CategoryLabel, Category>,
}

/// Model seed for a label: the first 8 bytes (little-endian) of
/// SHA-256(registry seed as little-endian u64 ‖ label).
pub fn category_seed(registry_seed: u64, label: &CategoryLabel) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(registry_seed.to_le_bytes());
    hasher.update(label.as_str().as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Label with the highest score; equal scores resolve to the label that
/// sorts first.
pub fn argmax_label(scores: &BTreeMap<CategoryLabel, f64>) -> Option<&CategoryLabel> {
    let mut best: Option<(&CategoryLabel, f64)> = None;
    for (label, &score) in scores {
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((label, score));
        }
    }
    best.map(|(l, _)| l)
}

impl Registry {
    pub fn new(dictionary_size: usize, hyper: Hyperparams, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if dictionary_size == 0 {
            return Err(Error::Parameter("dictionary size must be at least 1".into()));
        }
        Ok(Self {
            dictionary_size,
            hyper,
            seed,
            categories: BTreeMap::new(),
        })
    }

    /// Rebuilds a registry from stored categories, checking that every model
    /// matches the shared settings and has one stored instance per processed view.
    pub fn from_categories(
        dictionary_size: usize,
        hyper: Hyperparams,
        seed: u64,
        categories: impl IntoIterator<Item = (CategoryLabel, CategoryModel, Vec<BowDocument>)>,
    ) -> Result<Self> {
        let mut registry = Self::new(dictionary_size, hyper, seed)?;
        for (label, model, instances) in categories {
            if model.dictionary_size() != dictionary_size {
                return Err(Error::Structural {
                    what: "category dictionary size",
                    expected: dictionary_size,
                    actual: model.dictionary_size(),
                });
            }
            if *model.hyper() != hyper {
                return Err(Error::Validation(format!(
                    "category {label} uses different hyperparameters from the registry"
                )));
            }
            if model.doc_count() as usize != instances.len() {
                return Err(Error::Validation(format!(
                    "category {label} has doc_count {} but {} stored instances",
                    model.doc_count(),
                    instances.len()
                )));
            }
            for doc in &instances {
                doc.validate(dictionary_size)?;
            }
            if registry.categories.insert(label.clone(), Category { model, instances }).is_some() {
                return Err(Error::Validation(format!("duplicate category {label}")));
            }
        }
        Ok(registry)
    }

    pub fn dictionary_size(&self) -> usize {
        self.dictionary_size
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &CategoryLabel> {
        self.categories.keys()
    }

    pub fn categories(&self) -> impl Iterator<Item = (&CategoryLabel, &Category)> {
        self.categories.iter()
    }

    pub fn category(&self, label: &CategoryLabel) -> Option<&Category> {
        self.categories.get(label)
    }

    pub fn total_instances(&self) -> usize {
        self.categories.values().map(|c| c.instances.len()).sum()
    }

    /// Mean number of stored instances per category (0 when empty).
    pub fn mean_instances(&self) -> f64 {
        if self.categories.is_empty() {
            0.0
        } else {
            self.total_instances() as f64 / self.categories.len() as f64
        }
    }

    /// Trains `label` on `doc`, creating the category if needed. On error the
    /// registry is unchanged.
    pub fn teach(&mut self, label: &CategoryLabel, doc: &BowDocument) -> Result<()> {
        doc.validate(self.dictionary_size)?;
        if doc.is_empty() {
            return Err(Error::Validation(format!(
                "cannot train {label} on empty document {:?}",
                doc.source_id()
            )));
        }
        match self.categories.get_mut(label) {
            Some(category) => {
                category.model.fit_document(doc)?;
                category.instances.push(doc.clone());
            }
            None => {
                let mut model = CategoryModel::new(self.hyper, self.dictionary_size, category_seed(self.seed, label))?;
                model.fit_document(doc)?;
                self.categories.insert(
                    label.clone(),
                    Category {
                        model,
                        instances: vec![doc.clone()],
                    },
                );
            }
        }
        Ok(())
    }

    /// Corrective feedback after a wrong answer; trains the true label exactly like [`teach`](Self::teach).
    pub fn correct(&mut self, label: &CategoryLabel, doc: &BowDocument) -> Result<()> {
        self.teach(label, doc)
    }

    /// Scores `doc` under every category (in parallel) and returns the best label.
    pub fn ask(&self, doc: &BowDocument) -> Result<Classification> {
        if self.categories.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        doc.validate(self.dictionary_size)?;
        let scored: Vec<(CategoryLabel, f64)> = self
            .categories
            .par_iter()
            .map(|(label, c)| c.model.log_likelihood(doc).map(|s| (label.clone(), s)))
            .collect::<Result<_>>()?;
        let scores: BTreeMap<CategoryLabel, f64> = scored.into_iter().collect();
        let label = argmax_label(&scores).expect("non-empty registry").clone();
        Ok(Classification { label, scores })
    }
}
