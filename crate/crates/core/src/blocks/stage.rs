use crate::data::Point;
use crate::error::{Error, Result};
use crate::geometry::{ball_query, farthest_point_sample, relative_positions, FpsStart};

/// One encoder level for a batch of equally sized clouds.
#[derive(Clone, Debug)]
pub struct StageFeatures<V> {
    /// Per-sample positions, all of the same length.
    pub positions: Vec<Vec<Point>>,
    /// Row-major `[batch · points, C]`, sample-major.
    pub features: V,
    pub stage: usize,
    pub radius: f32,
}

impl<V> StageFeatures<V> {
    pub fn batch(&self) -> usize {
        self.positions.len()
    }

    pub fn points(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }
}

/// Neighborhoods of a batch, flattened to global row indices.
pub(crate) struct Grouping {
    pub centers: Vec<Vec<Point>>,
    /// Global row of every center in the source batch.
    pub center_rows: Vec<u32>,
    /// `[batch · centers · k]` global source rows.
    pub index: Vec<u32>,
    /// `[batch · centers · k, 3]` relative positions.
    pub rel: Vec<f32>,
}

pub(crate) fn uniform_points(positions: &[Vec<Point>]) -> Result<usize> {
    let p = positions.first().map_or(0, Vec::len);
    if positions.is_empty() || p == 0 {
        return Err(Error::EmptyBatch);
    }
    if positions.iter().any(|s| s.len() != p) {
        return Err(Error::dim("clouds in a batch must have equal point counts"));
    }
    Ok(p)
}

pub(crate) fn group_batch(
    positions: &[Vec<Point>],
    stride: usize,
    radius: f32,
    k: usize,
    normalize: bool,
    fps: FpsStart,
) -> Result<Grouping> {
    let p = uniform_points(positions)?;
    if stride == 0 || stride > p {
        return Err(Error::Count { requested: stride, available: p });
    }
    let m = p / stride;
    let mut out = Grouping {
        centers: Vec::with_capacity(positions.len()),
        center_rows: Vec::with_capacity(positions.len() * m),
        index: Vec::with_capacity(positions.len() * m * k),
        rel: Vec::with_capacity(positions.len() * m * k * 3),
    };
    for (s, pos) in positions.iter().enumerate() {
        let offset = (s * p) as u32;
        let picks: Vec<usize> = if stride == 1 { (0..p).collect() } else { farthest_point_sample(pos, m, fps)? };
        let centers: Vec<Point> = picks.iter().map(|&i| pos[i]).collect();
        let nbr = ball_query(&centers, pos, radius, k)?;
        out.rel.extend(relative_positions(&centers, pos, &nbr, radius, normalize)?);
        out.index.extend(nbr.indices.iter().map(|&i| i + offset));
        out.center_rows.extend(picks.iter().map(|&i| i as u32 + offset));
        out.centers.push(centers);
    }
    Ok(out)
}
