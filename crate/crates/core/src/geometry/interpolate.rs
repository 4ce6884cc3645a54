use super::{dist2, knn_query};
use crate::autodiff::{Graph, Real};
use crate::data::Point;
use crate::error::{Error, Result};

/// Floor applied to distances before taking reciprocals.
pub const DISTANCE_FLOOR: f32 = 1e-10;

/// Inverse-distance weights over the (up to) three nearest source points of each target.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpWeights {
    pub fan: usize,
    pub index: Vec<u32>,
    pub weights: Vec<f32>,
}

pub fn three_nn_weights(targets: &[Point], source: &[Point]) -> Result<InterpWeights> {
    if source.is_empty() {
        return Err(Error::Query("interpolation from an empty source set".into()));
    }
    let fan = source.len().min(3);
    let nbr = knn_query(targets, source, fan)?;
    let mut weights = Vec::with_capacity(nbr.indices.len());
    for (i, t) in targets.iter().enumerate() {
        let row = nbr.row(i);
        let d: Vec<f32> = row.iter().map(|&j| dist2(t, &source[j as usize]).sqrt()).collect();
        if d[0] == 0.0 {
            weights.push(1.0);
            weights.extend(std::iter::repeat(0.0).take(fan - 1));
            continue;
        }
        let inv: Vec<f32> = d.iter().map(|&x| 1.0 / x.max(DISTANCE_FLOOR)).collect();
        let total: f32 = inv.iter().sum();
        weights.extend(inv.iter().map(|w| w / total));
    }
    Ok(InterpWeights { fan, index: nbr.indices, weights })
}

/// Features of `source` interpolated onto `targets`, `[targets, C]`.
pub fn three_interpolate<T: Real, G: Graph<T>>(g: &mut G, targets: &[Point], source: &[Point], features: &G::Var) -> Result<G::Var> {
    let w = three_nn_weights(targets, source)?;
    g.weighted_gather(features, w.index, w.weights.into_iter().map(|v| T::of(v as f64)).collect(), w.fan)
}
