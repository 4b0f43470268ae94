//! CSV plot data derived from a finished experiment.

use super::{Event, ExperimentTrace};
use crate::error::{Error, Result};
use crate::registry::Registry;

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

/// `iteration,learned_categories`: one row per question/correction
/// iteration, with the number of categories learned at that point.
pub fn learning_curve_csv(trace: &ExperimentTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "learned_categories"]).map_err(csv_err)?;
    let mut learned = std::collections::BTreeSet::new();
    let mut iteration = 0usize;
    for e in &trace.events {
        match e {
            Event::Teach { label, .. } => {
                learned.insert(label);
            }
            Event::Ask { .. } | Event::Correct { .. } => {
                iteration += 1;
                w.serialize((iteration, learned.len())).map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

/// `learned_categories,asks,gca`: global accuracy so far at the moment each
/// new category is introduced, plus a final row at the end of the trace.
pub fn accuracy_curve_csv(trace: &ExperimentTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["learned_categories", "asks", "gca"]).map_err(csv_err)?;
    let mut learned = std::collections::BTreeSet::new();
    let (mut asks, mut right) = (0usize, 0usize);
    let gca = |asks: usize, right: usize| if asks == 0 { 0.0 } else { right as f64 / asks as f64 };
    for e in &trace.events {
        match e {
            Event::Teach { label, .. } => {
                if !learned.contains(label) && !learned.is_empty() {
                    w.serialize((learned.len(), asks, gca(asks, right))).map_err(csv_err)?;
                }
                learned.insert(label);
            }
            Event::Ask { correct, .. } => {
                asks += 1;
                right += usize::from(*correct);
            }
            Event::Correct { .. } => {}
        }
    }
    w.serialize((learned.len(), asks, gca(asks, right))).map_err(csv_err)?;
    finish(w)
}

/// `label,instances`: stored instances per category.
pub fn instances_csv(registry: &Registry) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "instances"]).map_err(csv_err)?;
    for (label, c) in registry.categories() {
        w.serialize((label.as_str(), c.instances().len())).map_err(csv_err)?;
    }
    finish(w)
}
