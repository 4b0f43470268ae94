use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::cloud::{Normal, Point, PointCloud};
use super::FeatureParams;
use crate::error::{Error, Result};

/// Neighbourhood size for PCA normal estimation.
pub const NORMAL_NEIGHBOURS: usize = 10;

/// `IW × IW` histogram of neighbours in `(alpha, beta)` coordinates around an
/// oriented keypoint. Row index is the beta bin, column the alpha bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinImage {
    pub values: Vec<f64>,
    pub keypoint: [f64; 3],
}

impl SpinImage {
    pub fn width(&self) -> usize {
        (self.values.len() as f64).sqrt().round() as usize
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `(alpha, beta)` of `x` relative to the oriented point `(p, n)`: radial
/// distance from the normal axis and signed elevation along it.
pub fn spin_coordinates(p: &Point, n: &Normal, x: &Point) -> (f64, f64) {
    let d = x - p;
    let beta = n.dot(&d);
    let alpha = (d.norm_squared() - beta * beta).max(0.0).sqrt();
    (alpha, beta)
}

/// Spin image with an explicit normal. Neighbours are the cloud points within
/// Euclidean distance `support_length` of the keypoint, excluding points that
/// coincide with it; each adds 1 to its hard `(beta, alpha)` bin.
pub fn spin_image_with_normal(cloud: &PointCloud, keypoint: &Point, normal: &Normal, params: &FeatureParams) -> SpinImage {
    let width = params.image_width;
    let sl = params.support_length;
    let mut values = vec![0.0; width * width];
    for x in cloud.points() {
        let d2 = (x - keypoint).norm_squared();
        if d2 == 0.0 || d2 > sl * sl {
            continue;
        }
        let (alpha, beta) = spin_coordinates(keypoint, normal, x);
        let col = ((alpha / sl * width as f64) as usize).min(width - 1);
        let row = (((beta + sl) / (2.0 * sl) * width as f64).max(0.0) as usize).min(width - 1);
        values[row * width + col] += 1.0;
    }
    SpinImage {
        values,
        keypoint: [keypoint.x, keypoint.y, keypoint.z],
    }
}

/// Spin image at cloud point `index`, using the stored normal if the cloud
/// has normals and a PCA estimate otherwise.
pub fn spin_image(cloud: &PointCloud, index: usize, params: &FeatureParams) -> Result<SpinImage> {
    let keypoint = cloud
        .points()
        .get(index)
        .ok_or_else(|| Error::Descriptor(format!("keypoint index {index} out of range")))?;
    let normal = match cloud.normals() {
        Some(normals) => normals[index],
        None => estimate_normal(cloud, keypoint, NORMAL_NEIGHBOURS)?,
    };
    Ok(spin_image_with_normal(cloud, keypoint, &normal, params))
}

/// Surface normal at `at` from PCA over its `k` nearest cloud points
/// (including itself), oriented towards the sensor at the origin.
pub fn estimate_normal(cloud: &PointCloud, at: &Point, k: usize) -> Result<Normal> {
    let mut by_distance: Vec<(f64, usize)> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| ((p - at).norm_squared(), i))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let neighbours: Vec<&Point> = by_distance
        .iter()
        .take(k)
        .map(|&(_, i)| &cloud.points()[i])
        .collect();
    if neighbours.len() < 3 {
        return Err(Error::Descriptor(format!(
            "only {} neighbours for normal estimation at {at}",
            neighbours.len()
        )));
    }

    let count = neighbours.len() as f64;
    let centroid = neighbours.iter().fold(Normal::zeros(), |acc, p| acc + p.coords) / count;
    let cov = neighbours.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - centroid;
        acc + d * d.transpose()
    }) / count;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (smallest, middle, largest) = (order[0], order[1], order[2]);
    let scale = eig.eigenvalues[largest];
    if !(scale > 0.0) || eig.eigenvalues[middle] <= 1e-12 * scale {
        return Err(Error::Descriptor(format!("degenerate neighbourhood at {at}")));
    }
    let mut normal: Normal = eig.eigenvectors.column(smallest).into_owned();
    let len = normal.norm();
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::Descriptor(format!("zero normal at {at}")));
    }
    normal /= len;
    if normal.dot(&(-at.coords)) < 0.0 {
        normal = -normal;
    }
    Ok(normal)
}
