//! Visual-word dictionary: k-means over pooled spin images, and nearest-centroid encoding.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::spin_image::SpinImage;
use super::FeatureParams;
use crate::binio::{self, Writer};
use crate::corpus::{BowDocument, VisualWordId};
use crate::error::{Error, Result};

pub const KMEANS_MAX_ITERS: usize = 100;
pub const KMEANS_REL_TOL: f64 = 1e-6;

const DICTIONARY_MAGIC: &[u8; 4] = b"LHDD";
pub const DICTIONARY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dictionary {
    centroids: Vec<Vec<f64>>,
    params: FeatureParams,
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_history: Vec<f64>,
}

impl KMeans {
    pub fn sse(&self) -> f64 {
        self.sse_history.last().copied().unwrap_or(0.0)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and its squared distance (lowest index on ties).
pub fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Lloyd's k-means with k-means++ seeding.
///
/// Stops after [`KMEANS_MAX_ITERS`] iterations, when assignments stop
/// changing, or when the relative SSE change falls below [`KMEANS_REL_TOL`].
/// A cluster that loses all its points is re-seeded at the point currently
/// farthest from its centroid.
pub fn kmeans(data: &[&[f64]], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::Dictionary("number of clusters must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::Dictionary(format!(
            "only {} descriptors for {k} visual words; use a dictionary size ≤ {}",
            data.len(),
            data.len()
        )));
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().position(|d| d.len() != dim) {
        return Err(Error::Dictionary(format!(
            "descriptor {bad} has length {} but descriptor 0 has {dim}",
            data[bad].len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(data, k, &mut rng);
    let mut assignments = vec![usize::MAX; data.len()];
    let mut sse_history = Vec::new();

    for _ in 0..KMEANS_MAX_ITERS {
        let nearest: Vec<(usize, f64)> = data.par_iter().map(|p| nearest_centroid(p, &centroids)).collect();
        let changed = nearest.iter().zip(&assignments).any(|((c, _), a)| c != a);
        let mut dists: Vec<f64> = nearest.iter().map(|&(_, d)| d).collect();
        assignments = nearest.iter().map(|&(c, _)| c).collect();
        let sse: f64 = dists.iter().sum();
        let previous = sse_history.last().copied();
        sse_history.push(sse);
        if !changed {
            break;
        }
        if let Some(prev) = previous {
            if (prev - sse).abs() <= KMEANS_REL_TOL * prev.abs() {
                break;
            }
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in data.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                let far = dists
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc })
                    .0;
                centroids[c] = data[far].to_vec();
                dists[far] = 0.0;
            }
        }
    }
    Ok(KMeans {
        centroids,
        assignments,
        sse_history,
    })
}

fn seed_plus_plus<R: Rng>(data: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut chosen = vec![false; data.len()];
    let first = rng.random_range(0..data.len());
    chosen[first] = true;
    let mut centroids = vec![data[first].to_vec()];
    let mut d2: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // everything left coincides with a centroid
            let free: Vec<usize> = (0..data.len()).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        let c = data[next].to_vec();
        for (i, p) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Builds a `size`-word dictionary from pooled descriptors.
pub fn build_dictionary(
    descriptors: &[SpinImage],
    size: usize,
    seed: u64,
    params: FeatureParams,
) -> Result<(Dictionary, KMeans)> {
    params.validate()?;
    let data: Vec<&[f64]> = descriptors.iter().map(|d| d.values.as_slice()).collect();
    let expected = params.descriptor_len();
    if let Some(bad) = data.iter().find(|d| d.len() != expected) {
        return Err(Error::Encoding {
            expected,
            actual: bad.len(),
        });
    }
    let fit = kmeans(&data, size, seed)?;
    let dictionary = Dictionary::new(fit.centroids.clone(), params)?;
    Ok((dictionary, fit))
}

impl Dictionary {
    pub fn new(centroids: Vec<Vec<f64>>, params: FeatureParams) -> Result<Self> {
        params.validate()?;
        if centroids.is_empty() {
            return Err(Error::Dictionary("dictionary needs at least one centroid".into()));
        }
        let len = params.descriptor_len();
        if let Some(bad) = centroids.iter().find(|c| c.len() != len) {
            return Err(Error::Encoding {
                expected: len,
                actual: bad.len(),
            });
        }
        Ok(Self { centroids, params })
    }

    pub fn size(&self) -> usize {
        self.centroids.len()
    }

    pub fn descriptor_len(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn params(&self) -> &FeatureParams {
        &self.params
    }

    /// Bag of words over nearest centroids (lowest index on ties).
    pub fn encode(&self, descriptors: &[SpinImage], source_id: impl Into<String>) -> Result<BowDocument> {
        let len = self.descriptor_len();
        if let Some(bad) = descriptors.iter().find(|d| d.values.len() != len) {
            return Err(Error::Encoding {
                expected: len,
                actual: bad.values.len(),
            });
        }
        let words: Vec<u32> = descriptors
            .par_iter()
            .map(|d| nearest_centroid(&d.values, &self.centroids).0 as u32)
            .collect();
        Ok(BowDocument::from_words(words.into_iter().map(VisualWordId), source_id))
    }

    pub(crate) fn write_fields(&self, w: &mut Writer) {
        w.f64(self.params.voxel_size);
        w.u64(self.params.image_width as u64);
        w.f64(self.params.support_length);
        w.u64(self.centroids.len() as u64);
        for c in &self.centroids {
            w.f64s(c.iter().copied());
        }
    }

    pub(crate) fn read_fields(r: &mut binio::Reader<'_>) -> Result<Self> {
        let params = FeatureParams {
            voxel_size: r.f64()?,
            image_width: r.usize()?,
            support_length: r.f64()?,
        };
        let n = r.usize()?;
        let centroids = (0..n).map(|_| r.f64s()).collect::<Result<Vec<_>>>()?;
        Self::new(centroids, params).map_err(|e| Error::Integrity(format!("stored dictionary is invalid: {e}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        self.write_fields(&mut w);
        w.finish(DICTIONARY_MAGIC, DICTIONARY_FORMAT_VERSION)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = binio::open(bytes, DICTIONARY_MAGIC, "dictionary", DICTIONARY_FORMAT_VERSION)?;
        let dict = Self::read_fields(&mut r)?;
        r.finish()?;
        Ok(dict)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Free-function form of [`Dictionary::encode`].
pub fn encode_bow(descriptors: &[SpinImage], dictionary: &Dictionary) -> Result<BowDocument> {
    dictionary.encode(descriptors, "")
}
