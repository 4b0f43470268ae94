use std::collections::BTreeMap;

use super::cloud::PointCloud;
use crate::error::{Error, Result};

/// Integer voxel coordinates of a point on a grid of cell size `voxel_size`
/// anchored at the origin.
pub fn voxel_of(p: &super::Point, voxel_size: f64) -> (i64, i64, i64) {
    (
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

/// Voxel-grid keypoints: for every occupied voxel, the index of the cloud
/// point nearest to the voxel centre (lowest index on ties). Indices are
/// returned in voxel order (x, then y, then z).
pub fn select_keypoints(cloud: &PointCloud, voxel_size: f64) -> Result<Vec<usize>> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::Parameter(format!("voxel size must be > 0, got {voxel_size}")));
    }
    let mut best: BTreeMap<(i64, i64, i64), (usize, f64)> = BTreeMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = voxel_of(p, voxel_size);
        let centre = nalgebra::Point3::new(
            (key.0 as f64 + 0.5) * voxel_size,
            (key.1 as f64 + 0.5) * voxel_size,
            (key.2 as f64 + 0.5) * voxel_size,
        );
        let d2 = (p - centre).norm_squared();
        best.entry(key)
            .and_modify(|cur| {
                if d2 < cur.1 {
                    *cur = (i, d2);
                }
            })
            .or_insert((i, d2));
    }
    Ok(best.into_values().map(|(i, _)| i).collect())
}
