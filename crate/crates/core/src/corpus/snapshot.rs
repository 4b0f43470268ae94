//! Versioned binary snapshots of a trained registry (and optionally the
//! dictionary it was trained with). The layout is described in
//! `docs/snapshot-format.md`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::binio::{self, Reader, Writer};
use crate::corpus::{BowDocument, CategoryLabel, VisualWordId};
use crate::error::{Error, Result};
use crate::features::Dictionary;
use crate::hdp::{CategoryModel, Hyperparams};
use crate::registry::Registry;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"LHDP";
pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySnapshot {
    pub label: CategoryLabel,
    pub t0: u64,
    pub doc_count: u64,
    /// `max_topics` rows of `dictionary_size` entries.
    pub lambda: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub instances: Vec<BowDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSnapshot {
    pub format_version: u32,
    pub dictionary_size: usize,
    pub hyper: Hyperparams,
    pub seed: u64,
    pub categories: Vec<CategorySnapshot>,
    pub dictionary: Option<Dictionary>,
}

impl ModelSnapshot {
    pub fn from_registry(registry: &Registry, dictionary: Option<&Dictionary>) -> Self {
        let categories = registry
            .categories()
            .map(|(label, c)| {
                let m = c.model();
                CategorySnapshot {
                    label: label.clone(),
                    t0: m.t0(),
                    doc_count: m.doc_count(),
                    lambda: m.lambda().rows().into_iter().map(|r| r.to_vec()).collect(),
                    u: m.u().to_vec(),
                    v: m.v().to_vec(),
                    instances: c.instances().to_vec(),
                }
            })
            .collect();
        Self {
            format_version: SNAPSHOT_FORMAT_VERSION,
            dictionary_size: registry.dictionary_size(),
            hyper: *registry.hyper(),
            seed: registry.seed(),
            categories,
            dictionary: dictionary.cloned(),
        }
    }

    pub fn to_registry(&self) -> Result<Registry> {
        let categories = self
            .categories
            .iter()
            .map(|c| {
                let rows = c.lambda.len();
                if let Some(row) = c.lambda.iter().find(|r| r.len() != self.dictionary_size) {
                    return Err(Error::Structural {
                        what: "lambda row length",
                        expected: self.dictionary_size,
                        actual: row.len(),
                    });
                }
                let flat: Vec<f64> = c.lambda.iter().flatten().copied().collect();
                let lambda = Array2::from_shape_vec((rows, self.dictionary_size), flat)
                    .map_err(|e| Error::Integrity(e.to_string()))?;
                let model = CategoryModel::from_parts(self.hyper, lambda, c.u.clone(), c.v.clone(), c.t0, c.doc_count)?;
                Ok((c.label.clone(), model, c.instances.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Registry::from_categories(self.dictionary_size, self.hyper, self.seed, categories)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.dictionary_size as u64);
        write_hyper(&mut w, &self.hyper);
        w.u64(self.seed);
        w.u64(self.categories.len() as u64);
        for c in &self.categories {
            w.str(c.label.as_str());
            w.u64(c.t0);
            w.u64(c.doc_count);
            w.u64(c.lambda.len() as u64);
            for row in &c.lambda {
                w.f64s(row.iter().copied());
            }
            w.f64s(c.u.iter().copied());
            w.f64s(c.v.iter().copied());
            w.u64(c.instances.len() as u64);
            for doc in &c.instances {
                w.str(doc.source_id());
                w.u64(doc.distinct_words() as u64);
                for (word, count) in doc.iter() {
                    w.u32(word.0);
                    w.u32(count);
                }
            }
        }
        match &self.dictionary {
            Some(d) => {
                w.u8(1);
                d.write_fields(&mut w);
            }
            None => w.u8(0),
        }
        w.finish(SNAPSHOT_MAGIC, self.format_version)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = binio::open(bytes, SNAPSHOT_MAGIC, "snapshot", SNAPSHOT_FORMAT_VERSION)?;
        let dictionary_size = r.usize()?;
        let hyper = read_hyper(&mut r)?;
        let seed = r.u64()?;
        let n = r.usize()?;
        let mut categories = Vec::new();
        for _ in 0..n {
            let label = CategoryLabel::new(r.str()?).map_err(|e| Error::Integrity(e.to_string()))?;
            let t0 = r.u64()?;
            let doc_count = r.u64()?;
            let rows = r.usize()?;
            let lambda = (0..rows).map(|_| r.f64s()).collect::<Result<Vec<_>>>()?;
            let u = r.f64s()?;
            let v = r.f64s()?;
            let docs = r.usize()?;
            let mut instances = Vec::new();
            for _ in 0..docs {
                let source = r.str()?;
                let distinct = r.usize()?;
                let mut pairs = Vec::new();
                for _ in 0..distinct {
                    pairs.push((VisualWordId(r.u32()?), r.u32()?));
                }
                let doc = BowDocument::from_counts(pairs, source).map_err(|e| Error::Integrity(e.to_string()))?;
                instances.push(doc);
            }
            categories.push(CategorySnapshot {
                label,
                t0,
                doc_count,
                lambda,
                u,
                v,
                instances,
            });
        }
        let dictionary = match r.u8()? {
            0 => None,
            1 => Some(Dictionary::read_fields(&mut r)?),
            other => return Err(Error::Integrity(format!("bad dictionary flag {other}"))),
        };
        r.finish()?;
        Ok(Self {
            format_version: SNAPSHOT_FORMAT_VERSION,
            dictionary_size,
            hyper,
            seed,
            categories,
            dictionary,
        })
    }
}

fn write_hyper(w: &mut Writer, h: &Hyperparams) {
    w.u64(h.max_topics as u64);
    w.u64(h.max_tables as u64);
    w.f64(h.gamma);
    w.f64(h.alpha0);
    w.f64(h.eta);
    w.f64(h.tau0);
    w.f64(h.kappa);
    w.f64(h.doc_tol);
    w.u64(h.doc_max_iters as u64);
}

fn read_hyper(r: &mut Reader<'_>) -> Result<Hyperparams> {
    Ok(Hyperparams {
        max_topics: r.usize()?,
        max_tables: r.usize()?,
        gamma: r.f64()?,
        alpha0: r.f64()?,
        eta: r.f64()?,
        tau0: r.f64()?,
        kappa: r.f64()?,
        doc_tol: r.f64()?,
        doc_max_iters: r.usize()?,
    })
}

pub fn save_snapshot(snapshot: &ModelSnapshot, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, snapshot.to_bytes())?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ModelSnapshot> {
    ModelSnapshot::from_bytes(&fs::read(path)?)
}

/// Pretty-printed JSON of every snapshot field. Floats are printed in
/// shortest round-trip form, so no precision is lost.
pub fn export_snapshot_text(snapshot: &ModelSnapshot) -> Result<String> {
    serde_json::to_string_pretty(snapshot).map_err(|e| Error::Integrity(e.to_string()))
}
