use rand::Rng;

use super::layer::{forward_all, Layer};
use super::stage::{uniform_points, StageFeatures};
use crate::autodiff::{Graph, ParamStore, Real};
use crate::error::{Error, Result};
use crate::geometry::three_nn_weights;

/// Feature propagation: interpolate coarse features onto the finer level, concatenate the
/// skip features, then two pointwise layers.
#[derive(Clone, Debug)]
pub struct FpBlock {
    pub coarse: usize,
    pub skip: usize,
    pub out: usize,
    pub layers: Vec<Layer>,
}

impl FpBlock {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, coarse: usize, skip: usize, out: usize, rng: &mut impl Rng) -> Self {
        let layers = vec![
            Layer::new(store, &format!("{name}.mlp0"), coarse + skip, out, true, true, rng),
            Layer::new(store, &format!("{name}.mlp1"), out, out, true, true, rng),
        ];
        FpBlock { coarse, skip, out, layers }
    }

    pub fn count(coarse: usize, skip: usize, out: usize) -> usize {
        Layer::count(coarse + skip, out, true) + Layer::count(out, out, true)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn macs(&self, fine_points: usize) -> u64 {
        self.layers.iter().map(|l| l.macs(fine_points)).sum()
    }

    pub fn forward<T: Real, G: Graph<T>>(
        &self,
        g: &mut G,
        coarse: &StageFeatures<G::Var>,
        fine: &StageFeatures<G::Var>,
    ) -> Result<StageFeatures<G::Var>> {
        if coarse.batch() != fine.batch() {
            return Err(Error::dim("coarse and fine levels hold different batch sizes"));
        }
        let pc = uniform_points(&coarse.positions).map_err(|_| Error::Query("feature propagation from an empty level".into()))?;
        uniform_points(&fine.positions)?;
        let mut index = Vec::new();
        let mut weights = Vec::new();
        let mut fan = 0;
        for (s, (c, f)) in coarse.positions.iter().zip(&fine.positions).enumerate() {
            let w = three_nn_weights(f, c)?;
            fan = w.fan;
            index.extend(w.index.iter().map(|&i| i + (s * pc) as u32));
            weights.extend(w.weights.iter().map(|&v| T::of(v as f64)));
        }
        let up = g.weighted_gather(&coarse.features, index, weights, fan)?;
        let cat = g.concat(&up, &fine.features)?;
        let y = forward_all(&self.layers, g, &cat)?;
        Ok(StageFeatures { positions: fine.positions.clone(), features: y, stage: fine.stage, radius: fine.radius })
    }
}
