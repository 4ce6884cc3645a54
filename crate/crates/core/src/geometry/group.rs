use super::NeighborIndex;
use crate::autodiff::{Graph, Real, Tensor};
use crate::data::Point;
use crate::error::{Error, Result};

/// Relative neighbor positions `[centers·k, 3]`, divided by `radius` when `normalize` is set.
pub fn relative_positions(centers: &[Point], source: &[Point], nbr: &NeighborIndex, radius: f32, normalize: bool) -> Result<Vec<f32>> {
    if nbr.rows() != centers.len() {
        return Err(Error::dim(format!("{} neighbor rows for {} centers", nbr.rows(), centers.len())));
    }
    let mut out = Vec::with_capacity(nbr.indices.len() * 3);
    for (i, c) in centers.iter().enumerate() {
        for &j in nbr.row(i) {
            let p = source
                .get(j as usize)
                .ok_or_else(|| Error::dim(format!("neighbor {j} outside source of {}", source.len())))?;
            for a in 0..3 {
                let d = p[a] - c[a];
                out.push(if normalize { d / radius } else { d });
            }
        }
    }
    Ok(out)
}

/// Grouped neighborhood features `[centers·k, C+3]`: each row is `[x_j ; Δp]`.
pub fn group_relative<T: Real, G: Graph<T>>(
    g: &mut G,
    centers: &[Point],
    source: &[Point],
    features: &G::Var,
    nbr: &NeighborIndex,
    radius: f32,
    normalize: bool,
) -> Result<G::Var> {
    if g.value(features).rows() != source.len() {
        return Err(Error::dim(format!("{} feature rows for {} source points", g.value(features).rows(), source.len())));
    }
    let rel = relative_positions(centers, source, nbr, radius, normalize)?;
    let extra = Tensor::matrix(nbr.indices.len(), 3, rel.into_iter().map(|v| T::of(v as f64)).collect())?;
    g.gather(features, nbr.indices.clone(), Some(extra))
}
