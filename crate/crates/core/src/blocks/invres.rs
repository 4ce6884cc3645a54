use rand::Rng;

use super::layer::Layer;
use super::stage::{group_batch, StageFeatures};
use crate::autodiff::{Graph, ParamStore, Real, Tensor};
use crate::error::{Error, Result};
use crate::geometry::FpsStart;

/// Inverted residual MLP block: one neighborhood layer, max-reduce, then two pointwise
/// layers `C → eC → C`, identity shortcut, relu after the sum.
#[derive(Clone, Debug)]
pub struct InvResMlp {
    pub channels: usize,
    pub local: Layer,
    pub expand: Layer,
    pub project: Layer,
    pub k: usize,
    pub radius: f32,
    pub normalize: bool,
}

impl InvResMlp {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        expansion: usize,
        k: usize,
        radius: f32,
        normalize: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let c = channels;
        InvResMlp {
            channels,
            local: Layer::new(store, &format!("{name}.local"), c + 3, c, true, true, rng),
            expand: Layer::new(store, &format!("{name}.pw0"), c, expansion * c, true, true, rng),
            project: Layer::new(store, &format!("{name}.pw1"), expansion * c, c, true, false, rng),
            k,
            radius,
            normalize,
        }
    }

    pub fn count(channels: usize, expansion: usize) -> usize {
        let c = channels;
        Layer::count(c + 3, c, true) + Layer::count(c, expansion * c, true) + Layer::count(expansion * c, c, true)
    }

    pub fn param_count(&self) -> usize {
        self.local.param_count() + self.expand.param_count() + self.project.param_count()
    }

    pub fn macs(&self, points: usize) -> u64 {
        self.local.macs(points * self.k) + self.expand.macs(points) + self.project.macs(points)
    }

    pub fn forward<T: Real, G: Graph<T>>(&self, g: &mut G, input: &StageFeatures<G::Var>) -> Result<StageFeatures<G::Var>> {
        let c = g.value(&input.features).cols();
        if c != self.channels {
            return Err(Error::dim(format!("inverted residual block of width {} got {c} channels", self.channels)));
        }
        let grp = group_batch(&input.positions, 1, self.radius, self.k, self.normalize, FpsStart::Index(0))?;
        let rel = Tensor::matrix(grp.index.len(), 3, grp.rel.iter().map(|&v| T::of(v as f64)).collect())?;
        let grouped = g.gather(&input.features, grp.index, Some(rel))?;
        let y = self.local.forward(g, &grouped)?;
        let y = g.max_reduce(&y, self.k)?;
        let y = self.expand.forward(g, &y)?;
        let y = self.project.forward(g, &y)?;
        let sum = g.add(&y, &input.features)?;
        Ok(StageFeatures { positions: input.positions.clone(), features: g.relu(&sum), stage: input.stage, radius: self.radius })
    }
}
