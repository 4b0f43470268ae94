use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{CategoryLabel, LabeledCorpus};
use crate::error::{Error, Result};
use crate::hdp::Hyperparams;
use crate::registry::Registry;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineReport {
    pub mean_accuracy: f64,
    /// Permutation-major: `fold_accuracies[p * folds + f]`.
    pub fold_accuracies: Vec<f64>,
    pub folds: usize,
    pub permutations: usize,
}

impl OfflineReport {
    pub fn std_accuracy(&self) -> f64 {
        let n = self.fold_accuracies.len() as f64;
        let var = self.fold_accuracies.iter().map(|a| (a - self.mean_accuracy).powi(2)).sum::<f64>() / n;
        var.sqrt()
    }
}

/// Fold index of every document: within each label, the documents are taken
/// in `order` and dealt round-robin over the folds.
pub fn stratified_folds(labels: &[&CategoryLabel], order: &[usize], folds: usize) -> Vec<usize> {
    let mut dealt: BTreeMap<&CategoryLabel, usize> = BTreeMap::new();
    let mut fold_of = vec![0; labels.len()];
    for &i in order {
        let next = dealt.entry(labels[i]).or_insert(0);
        fold_of[i] = *next % folds;
        *next += 1;
    }
    fold_of
}

/// Repeated stratified k-fold cross-validation. For each permutation the
/// corpus is shuffled and split into `folds` stratified folds; for each fold
/// a fresh registry is taught every training document (in shuffled order)
/// and asked about every held-out document.
pub fn run_offline(
    corpus: &LabeledCorpus,
    folds: usize,
    permutations: usize,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<OfflineReport> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if permutations == 0 {
        return Err(Error::Config("need at least 1 permutation".into()));
    }
    corpus.validate()?;
    let by_label = corpus.indices_by_label();
    if by_label.is_empty() {
        return Err(Error::Config("corpus is empty".into()));
    }
    for (label, views) in &by_label {
        if views.len() < folds {
            return Err(Error::Config(format!(
                "category {label} has {} documents, fewer than {folds} folds",
                views.len()
            )));
        }
    }
    if let Some(&i) = corpus.empty_documents().first() {
        return Err(Error::Config(format!(
            "document {i} ({:?}) is empty",
            corpus.documents[i].0.source_id()
        )));
    }

    let labels: Vec<&CategoryLabel> = corpus.documents.iter().map(|(_, l)| l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::new();
    for _ in 0..permutations {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut rng);
        let fold_of = stratified_folds(&labels, &order, folds);
        for f in 0..folds {
            jobs.push((order.clone(), fold_of.clone(), f));
        }
    }
    let fold_accuracies = jobs
        .par_iter()
        .map(|(order, fold_of, f)| {
            let mut registry = Registry::new(corpus.dictionary_size, *hyper, seed)?;
            for &i in order.iter().filter(|&&i| fold_of[i] != *f) {
                let (doc, label) = &corpus.documents[i];
                registry.teach(label, doc)?;
            }
            let mut total = 0usize;
            let mut right = 0usize;
            for &i in order.iter().filter(|&&i| fold_of[i] == *f) {
                let (doc, label) = &corpus.documents[i];
                total += 1;
                right += usize::from(registry.ask(doc)?.label == *label);
            }
            Ok(right as f64 / total as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(OfflineReport {
        mean_accuracy,
        fold_accuracies,
        folds,
        permutations,
    })
}
