use rand::Rng;

use super::FeatureRecipe;
use crate::autodiff::Tensor;
use crate::data::{Point, PointCloud};
use crate::error::{Error, Result};

/// Clouds padded to a common size, with assembled input features.
#[derive(Clone, Debug)]
pub struct Batch {
    pub positions: Vec<Vec<Point>>,
    /// `[batch · points, recipe width]`.
    pub features: Tensor<f32>,
    /// One entry per cloud, when every cloud carries a cloud label.
    pub cloud_labels: Option<Vec<usize>>,
    /// One entry per row, when every cloud carries point labels.
    pub point_labels: Option<Vec<usize>>,
    /// False on rows added by padding.
    pub mask: Vec<bool>,
    /// Original point count of every cloud.
    pub sizes: Vec<usize>,
}

fn height(cloud: &PointCloud) -> Vec<f32> {
    match &cloud.heights {
        Some(h) => h.clone(),
        None => {
            let lo = cloud.positions.iter().map(|p| p[2]).fold(f32::INFINITY, f32::min);
            cloud.positions.iter().map(|p| p[2] - lo).collect()
        }
    }
}

impl Batch {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn points(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Pads smaller clouds to the largest count by resampling their own points with
    /// replacement; padded rows are masked out. Height is derived from positions when the
    /// cloud does not carry it.
    pub fn from_clouds(clouds: &[PointCloud], recipe: &FeatureRecipe, rng: &mut impl Rng) -> Result<Batch> {
        if clouds.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let p = clouds.iter().map(PointCloud::len).max().unwrap_or(0);
        if clouds.iter().any(PointCloud::is_empty) {
            return Err(Error::Input("batch contains an empty cloud".into()));
        }
        let w = recipe.width();
        let mut positions = Vec::with_capacity(clouds.len());
        let mut feats = Vec::with_capacity(clouds.len() * p * w);
        let mut mask = Vec::with_capacity(clouds.len() * p);
        let all_cloud = clouds.iter().all(|c| c.cloud_label().is_some());
        let all_point = clouds.iter().all(|c| c.point_labels().is_some());
        let mut cloud_labels = Vec::new();
        let mut point_labels = Vec::new();
        for c in clouds {
            c.validate(None)?;
            if recipe.colors && c.colors.is_none() {
                return Err(Error::Input("feature recipe needs colors but a cloud has none".into()));
            }
            if recipe.normals && c.normals.is_none() {
                return Err(Error::Input("feature recipe needs normals but a cloud has none".into()));
            }
            let n = c.len();
            let rows: Vec<usize> = (0..n).chain((n..p).map(|_| rng.gen_range(0..n))).collect();
            let h = if recipe.height { height(c) } else { Vec::new() };
            for &i in &rows {
                if recipe.positions {
                    feats.extend_from_slice(&c.positions[i]);
                }
                if let Some(col) = c.colors.as_ref().filter(|_| recipe.colors) {
                    feats.extend_from_slice(&col[i]);
                }
                if let Some(nor) = c.normals.as_ref().filter(|_| recipe.normals) {
                    feats.extend_from_slice(&nor[i]);
                }
                if recipe.height {
                    feats.push(h[i]);
                }
            }
            mask.extend((0..p).map(|r| r < n));
            positions.push(rows.iter().map(|&i| c.positions[i]).collect());
            if let Some(l) = c.cloud_label() {
                cloud_labels.push(l as usize);
            }
            if let Some(l) = c.point_labels() {
                point_labels.extend(rows.iter().map(|&i| l[i] as usize));
            }
        }
        Ok(Batch {
            positions,
            features: Tensor::matrix(clouds.len() * p, w, feats)?,
            cloud_labels: all_cloud.then_some(cloud_labels),
            point_labels: all_point.then_some(point_labels),
            mask,
            sizes: clouds.iter().map(PointCloud::len).collect(),
        })
    }
}
