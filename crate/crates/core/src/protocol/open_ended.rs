use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{compute_metrics, windowed_accuracy, Event, ExperimentTrace, Metrics, TeacherConfig, Termination};
use crate::corpus::{CategoryLabel, LabeledCorpus};
use crate::error::{Error, Result};
use crate::hdp::Hyperparams;
use crate::registry::Registry;

/// Views of one category as seen by the teacher.
struct ViewPool {
    all: Vec<usize>,
    /// Not yet shown, in presentation order (popped from the back).
    unseen: Vec<usize>,
    /// Shown for training (teach or correction); never asked again.
    trained: BTreeSet<usize>,
}

impl ViewPool {
    fn next_unseen(&mut self) -> Option<usize> {
        self.unseen.pop()
    }

    /// Unseen view if any, otherwise a view drawn with replacement from those
    /// never used for training (or from all views if every view was).
    fn next_ask<R: Rng>(&mut self, rng: &mut R) -> (usize, bool) {
        if let Some(v) = self.unseen.pop() {
            return (v, false);
        }
        let candidates: Vec<usize> = self.all.iter().copied().filter(|v| !self.trained.contains(v)).collect();
        let from = if candidates.is_empty() { &self.all } else { &candidates };
        (from[rng.random_range(0..from.len())], true)
    }
}

fn check_corpus(corpus: &LabeledCorpus, cfg: &TeacherConfig) -> Result<BTreeMap<CategoryLabel, Vec<usize>>> {
    cfg.validate()?;
    corpus.validate()?;
    let by_label = corpus.indices_by_label();
    if by_label.len() < 2 {
        return Err(Error::Config(format!(
            "open-ended evaluation needs at least 2 categories, corpus has {}",
            by_label.len()
        )));
    }
    for (label, views) in &by_label {
        if views.len() < cfg.teach_views + 1 {
            return Err(Error::Config(format!(
                "category {label} has {} views; at least {} are needed",
                views.len(),
                cfg.teach_views + 1
            )));
        }
    }
    if let Some(&i) = corpus.empty_documents().first() {
        return Err(Error::Config(format!(
            "document {} ({:?}) is empty",
            i,
            corpus.documents[i].0.source_id()
        )));
    }
    Ok(by_label)
}

/// Simulated-teacher experiment.
///
/// Categories are introduced in a seeded random order, each with
/// `teach_views` random views. After every introduction the teacher keeps
/// asking about unseen views of all learned categories, cycling through them
/// in a fresh random order per cycle, and corrects every wrong answer. After
/// each ask (and its correction) the next category is introduced once at
/// least `n` asks were made since the last introduction and the accuracy over
/// the last `window_factor × n` asks exceeds `tau`, where `n` is the number of
/// learned categories. The run ends with `LackOfData` when the last category
/// passes this test, or with `Stalled` after `patience` asks without passing.
pub fn run_open_ended(
    corpus: &LabeledCorpus,
    cfg: &TeacherConfig,
    hyper: &Hyperparams,
) -> Result<(Metrics, ExperimentTrace, Registry)> {
    let by_label = check_corpus(corpus, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<CategoryLabel> = by_label.keys().cloned().collect();
    order.shuffle(&mut rng);
    let mut pools: BTreeMap<CategoryLabel, ViewPool> = by_label
        .into_iter()
        .map(|(label, all)| {
            let mut unseen = all.clone();
            unseen.shuffle(&mut rng);
            (
                label,
                ViewPool {
                    all,
                    unseen,
                    trained: BTreeSet::new(),
                },
            )
        })
        .collect();

    let mut registry = Registry::new(corpus.dictionary_size, *hyper, cfg.seed)?;
    let mut trace = ExperimentTrace::default();
    let mut learned: Vec<CategoryLabel> = Vec::new();
    let mut remaining = order.into_iter();

    let introduce = |label: CategoryLabel,
                         registry: &mut Registry,
                         trace: &mut ExperimentTrace,
                         pools: &mut BTreeMap<CategoryLabel, ViewPool>|
     -> Result<()> {
        let pool = pools.get_mut(&label).expect("label from corpus");
        for _ in 0..cfg.teach_views {
            let view = pool.next_unseen().expect("corpus checked for enough views");
            registry.teach(&label, &corpus.documents[view].0)?;
            pool.trained.insert(view);
            trace.events.push(Event::Teach {
                label: label.clone(),
                view,
            });
        }
        Ok(())
    };

    let first = remaining.next().expect("at least two categories");
    introduce(first.clone(), &mut registry, &mut trace, &mut pools)?;
    learned.push(first);
    let mut asks_since_intro = 0usize;

    let termination = 'experiment: loop {
        let mut cycle = learned.clone();
        cycle.shuffle(&mut rng);
        for truth in cycle {
            let pool = pools.get_mut(&truth).expect("learned label has a pool");
            let (view, resampled) = pool.next_ask(&mut rng);
            let doc = &corpus.documents[view].0;
            let answer = registry.ask(doc)?;
            let correct = answer.label == truth;
            trace.events.push(Event::Ask {
                view,
                predicted: answer.label,
                truth: truth.clone(),
                correct,
                resampled,
            });
            if !correct {
                registry.correct(&truth, doc)?;
                pool.trained.insert(view);
                trace.events.push(Event::Correct {
                    label: truth.clone(),
                    view,
                });
            }
            asks_since_intro += 1;

            let n = learned.len();
            if asks_since_intro >= n && windowed_accuracy(&trace, cfg.window_factor * n) > cfg.tau {
                match remaining.next() {
                    Some(next) => {
                        log::debug!("introducing {next} after {} events", trace.events.len());
                        introduce(next.clone(), &mut registry, &mut trace, &mut pools)?;
                        learned.push(next);
                        asks_since_intro = 0;
                        continue 'experiment;
                    }
                    None => break 'experiment Termination::LackOfData,
                }
            }
            if asks_since_intro >= cfg.patience {
                break 'experiment Termination::Stalled;
            }
        }
    };
    trace.termination = Some(termination);
    let metrics = compute_metrics(&trace, &registry);
    Ok((metrics, trace, registry))
}

/// Rebuilds the registry a trace produced by re-applying its teach and
/// correct events to a fresh registry.
pub fn replay_trace(trace: &ExperimentTrace, corpus: &LabeledCorpus, hyper: &Hyperparams, seed: u64) -> Result<Registry> {
    let mut registry = Registry::new(corpus.dictionary_size, *hyper, seed)?;
    for (i, e) in trace.events.iter().enumerate() {
        let (label, view) = match e {
            Event::Teach { label, view } | Event::Correct { label, view } => (label, *view),
            Event::Ask { .. } => continue,
        };
        let (doc, _) = corpus
            .documents
            .get(view)
            .ok_or_else(|| Error::Validation(format!("event {i} refers to missing view {view}")))?;
        registry.teach(label, doc)?;
    }
    Ok(registry)
}
