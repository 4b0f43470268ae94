//! Evaluation protocols: the simulated-teacher open-ended experiment and
//! offline stratified k-fold cross-validation, plus the metrics and plot
//! data derived from an experiment trace.

mod offline;
mod open_ended;
mod report;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::CategoryLabel;
use crate::error::{Error, Result};
use crate::registry::Registry;

pub use offline::{run_offline, stratified_folds, OfflineReport};
pub use open_ended::{replay_trace, run_open_ended};
pub use report::{accuracy_curve_csv, instances_csv, learning_curve_csv};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    /// Window accuracy that must be exceeded before a new category is introduced.
    pub tau: f64,
    /// The accuracy window spans `window_factor × n` asks for `n` learned categories.
    pub window_factor: usize,
    /// Views shown when a category is introduced.
    pub teach_views: usize,
    /// Asks without reaching `tau` after which the experiment stops.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            tau: 0.66,
            window_factor: 3,
            teach_views: 3,
            patience: 100,
            seed: 0,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must be in (0, 1), got {}", self.tau)));
        }
        if self.window_factor == 0 {
            return Err(Error::Config("window factor must be ≥ 1".into()));
        }
        if self.teach_views == 0 {
            return Err(Error::Config("teach_views must be ≥ 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// One teacher action. `view` is the document's index in the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Teach {
        label: CategoryLabel,
        view: usize,
    },
    Ask {
        view: usize,
        predicted: CategoryLabel,
        truth: CategoryLabel,
        correct: bool,
        /// The view was drawn again after its category ran out of unseen views.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        resampled: bool,
    },
    Correct {
        label: CategoryLabel,
        view: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every category in the corpus was introduced and learned.
    LackOfData,
    /// Accuracy did not recover within the patience budget.
    Stalled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::LackOfData => "lack_of_data",
            Termination::Stalled => "stalled",
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum EndLine {
    End { reason: Termination },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentTrace {
    pub events: Vec<Event>,
    pub termination: Option<Termination>,
}

impl ExperimentTrace {
    pub fn asks(&self) -> impl Iterator<Item = bool> + '_ {
        self.events.iter().filter_map(|e| match e {
            Event::Ask { correct, .. } => Some(*correct),
            _ => None,
        })
    }

    /// Checks that the first event is a teach and that every correction
    /// directly answers a wrong ask about the same view.
    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.events.first() {
            if !matches!(first, Event::Teach { .. }) {
                return Err(Error::Validation("trace must start with a teach event".into()));
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            if let Event::Correct { label, view } = e {
                let ok = i > 0
                    && matches!(&self.events[i - 1],
                        Event::Ask { view: v, truth, correct: false, .. } if v == view && truth == label);
                if !ok {
                    return Err(Error::Validation(format!(
                        "event {i}: correction of view {view} does not follow a wrong ask of that view"
                    )));
                }
            }
        }
        Ok(())
    }

    /// One JSON object per line; the termination reason, if any, is the last line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        if let Some(reason) = self.termination {
            out.push_str(&serde_json::to_string(&EndLine::End { reason }).expect("end line serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut trace = Self::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            if trace.termination.is_some() {
                return Err(Error::Validation(format!("trace line {}: event after end", i + 1)));
            }
            let bad = |e: serde_json::Error| Error::Validation(format!("trace line {}: {e}", i + 1));
            let value: serde_json::Value = serde_json::from_str(line).map_err(bad)?;
            if value.get("event").and_then(|v| v.as_str()) == Some("end") {
                let EndLine::End { reason } = serde_json::from_value(value).map_err(bad)?;
                trace.termination = Some(reason);
            } else {
                trace.events.push(serde_json::from_value(value).map_err(bad)?);
            }
        }
        Ok(trace)
    }
}

/// Fraction of correct answers among the last `window` asks (all asks if
/// fewer); 0 when there are none.
pub fn windowed_accuracy(trace: &ExperimentTrace, window: usize) -> f64 {
    let mut seen = 0usize;
    let mut right = 0usize;
    for e in trace.events.iter().rev() {
        if seen == window {
            break;
        }
        if let Event::Ask { correct, .. } = e {
            seen += 1;
            right += usize::from(*correct);
        }
    }
    if seen == 0 {
        0.0
    } else {
        right as f64 / seen as f64
    }
}

/// Accuracy over the last `3n` asks for `n` learned categories.
pub fn window_accuracy(trace: &ExperimentTrace, n: usize) -> f64 {
    windowed_accuracy(trace, 3 * n.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Question/correction iterations: asks plus corrections.
    pub qci: usize,
    /// Learned categories.
    pub lc: usize,
    /// Average stored instances per learned category.
    pub aic: f64,
    /// Global categorization accuracy: correct asks over all asks.
    pub gca: f64,
}

impl Metrics {
    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        format!("qci={}\nlc={}\naic={}\ngca={}\n", self.qci, self.lc, self.aic, self.gca)
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "learned categories: {}\nquestion/correction iterations: {}\naverage instances per category: {:.2}\nglobal categorization accuracy: {:.2}%",
            self.lc,
            self.qci,
            self.aic,
            100.0 * self.gca
        )
    }
}

/// Ask/correction counts and accuracy from the trace; `aic` from the
/// registry's stored instances.
pub fn compute_metrics(trace: &ExperimentTrace, registry: &Registry) -> Metrics {
    let mut metrics = metrics_from_trace(trace);
    metrics.aic = registry.mean_instances();
    metrics
}

/// Metrics computed from the trace alone, counting every teach and
/// correction as a stored instance.
pub fn metrics_from_trace(trace: &ExperimentTrace) -> Metrics {
    let mut asks = 0usize;
    let mut right = 0usize;
    let mut corrections = 0usize;
    let mut teaches = 0usize;
    let mut learned = BTreeSet::new();
    for e in &trace.events {
        match e {
            Event::Teach { label, .. } => {
                teaches += 1;
                learned.insert(label);
            }
            Event::Ask { correct, .. } => {
                asks += 1;
                right += usize::from(*correct);
            }
            Event::Correct { label, .. } => {
                corrections += 1;
                learned.insert(label);
            }
        }
    }
    let lc = learned.len();
    Metrics {
        qci: asks + corrections,
        lc,
        aic: if lc == 0 { 0.0 } else { (teaches + corrections) as f64 / lc as f64 },
        gca: if asks == 0 { 0.0 } else { right as f64 / asks as f64 },
    }
}
