//! Point cloud to bag of visual words: voxel-grid keypoints, spin images,
//! and a k-means dictionary.

mod cloud;
mod dataset;
mod dictionary;
mod keypoints;
mod spin_image;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cloud::{Normal, Point, PointCloud};
pub use dataset::{find_clouds, CloudFile, CLOUD_EXTENSIONS};
pub use dictionary::{
    build_dictionary, encode_bow, kmeans, nearest_centroid, Dictionary, KMeans, DICTIONARY_FORMAT_VERSION,
    KMEANS_MAX_ITERS, KMEANS_REL_TOL,
};
pub use keypoints::{select_keypoints, voxel_of};
pub use spin_image::{
    estimate_normal, spin_coordinates, spin_image, spin_image_with_normal, SpinImage, NORMAL_NEIGHBOURS,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Voxel edge in meters.
    pub voxel_size: f64,
    /// Spin images are `image_width × image_width`.
    pub image_width: usize,
    /// Support radius in meters.
    pub support_length: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            voxel_size: 0.03,
            image_width: 4,
            support_length: 0.1,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::Parameter(format!("voxel size must be > 0, got {}", self.voxel_size)));
        }
        if self.image_width < 2 {
            return Err(Error::Parameter(format!("image width must be ≥ 2, got {}", self.image_width)));
        }
        if !(self.support_length > 0.0 && self.support_length.is_finite()) {
            return Err(Error::Parameter(format!(
                "support length must be > 0, got {}",
                self.support_length
            )));
        }
        Ok(())
    }

    pub fn descriptor_len(&self) -> usize {
        self.image_width * self.image_width
    }
}

/// Spin images at every keypoint of the cloud, in keypoint order.
/// Keypoints whose normal cannot be estimated are skipped with a warning.
pub fn describe_cloud(cloud: &PointCloud, params: &FeatureParams) -> Result<Vec<SpinImage>> {
    params.validate()?;
    let keypoints = select_keypoints(cloud, params.voxel_size)?;
    let described: Vec<Result<SpinImage>> = keypoints.par_iter().map(|&i| spin_image(cloud, i, params)).collect();
    let mut out = Vec::with_capacity(described.len());
    for (d, &i) in described.into_iter().zip(&keypoints) {
        match d {
            Ok(img) => out.push(img),
            Err(Error::Descriptor(msg)) => log::warn!("skipping keypoint {i}: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
