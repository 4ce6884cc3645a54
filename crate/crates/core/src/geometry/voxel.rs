use std::collections::HashSet;

use rand::Rng;

use super::knn_query;
use crate::data::PointCloud;
use crate::error::{Error, Result};

/// Keeps the first point (in input order) of every occupied voxel.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f32) -> Result<PointCloud> {
    if !(voxel > 0.0) {
        return Err(Error::Contract(format!("voxel size must be positive, got {voxel}")));
    }
    let mut seen = HashSet::new();
    let keep: Vec<usize> = cloud
        .positions
        .iter()
        .enumerate()
        .filter(|(_, p)| seen.insert(p.map(|v| (v / voxel).floor() as i64)))
        .map(|(i, _)| i)
        .collect();
    Ok(cloud.select(&keep))
}

/// The `n` nearest neighbors of point `seed`, nearest first (the whole cloud when `n ≥ P`).
pub fn crop_around(cloud: &PointCloud, seed: usize, n: usize) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::Input("cannot crop an empty cloud".into()));
    }
    if n == 0 {
        return Err(Error::Contract("crop size must be at least 1".into()));
    }
    if n >= cloud.len() {
        return Ok(cloud.clone());
    }
    let center = *cloud
        .positions
        .get(seed)
        .ok_or(Error::Count { requested: seed + 1, available: cloud.len() })?;
    let nbr = knn_query(&[center], &cloud.positions, n)?;
    let idx: Vec<usize> = nbr.row(0).iter().map(|&i| i as usize).collect();
    Ok(cloud.select(&idx))
}

/// Crop to the `n` nearest neighbors of a uniformly drawn point.
pub fn crop_fixed_count(cloud: &PointCloud, n: usize, rng: &mut impl Rng) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::Input("cannot crop an empty cloud".into()));
    }
    let seed = rng.gen_range(0..cloud.len());
    crop_around(cloud, seed, n)
}
