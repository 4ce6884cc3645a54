use rand::Rng;

use super::layer::{forward_all, Layer};
use super::stage::{group_batch, StageFeatures};
use crate::autodiff::{Graph, ParamStore, Real, Tensor};
use crate::error::{Error, Result};
use crate::geometry::FpsStart;

/// Set abstraction: subsample, group `[x_j ; Δp]`, shared MLPs, max-reduce.
#[derive(Clone, Debug)]
pub struct SaBlock {
    pub cin: usize,
    pub cout: usize,
    pub layers: Vec<Layer>,
    pub residual: bool,
    /// Projection for the residual path when widths differ.
    pub shortcut: Option<Layer>,
    pub stride: usize,
    pub k: usize,
    pub radius: f32,
    pub normalize: bool,
    pub fps: FpsStart,
}

#[derive(Clone, Copy, Debug)]
pub struct SaSpec {
    pub cin: usize,
    pub cout: usize,
    pub mlp_layers: usize,
    pub residual: bool,
    pub stride: usize,
    pub k: usize,
    pub radius: f32,
    pub normalize: bool,
    pub fps: FpsStart,
}

impl SaSpec {
    /// Widths from the grouped input to the output.
    pub fn plan(&self) -> Result<Vec<usize>> {
        let (i, o) = (self.cin + 3, self.cout);
        let mid = (o / 2).max(1);
        match self.mlp_layers {
            1 => Ok(vec![i, o]),
            2 => Ok(vec![i, mid, o]),
            3 => Ok(vec![i, mid, mid, o]),
            n => Err(Error::Config(format!("set abstraction supports 1 to 3 MLP layers, got {n}"))),
        }
    }

    pub fn param_count(&self) -> Result<usize> {
        let plan = self.plan()?;
        let mlp: usize = plan.windows(2).map(|w| Layer::count(w[0], w[1], true)).sum();
        let shortcut = if self.residual && self.cin != self.cout { Layer::count(self.cin, self.cout, false) } else { 0 };
        Ok(mlp + shortcut)
    }
}

impl SaBlock {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, spec: SaSpec, rng: &mut impl Rng) -> Result<Self> {
        let plan = spec.plan()?;
        let n = plan.len() - 1;
        let layers = plan
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer::new(store, &format!("{name}.mlp{i}"), w[0], w[1], true, !(spec.residual && i + 1 == n), rng))
            .collect();
        let shortcut = (spec.residual && spec.cin != spec.cout)
            .then(|| Layer::new(store, &format!("{name}.shortcut"), spec.cin, spec.cout, false, false, rng));
        Ok(SaBlock {
            cin: spec.cin,
            cout: spec.cout,
            layers,
            residual: spec.residual,
            shortcut,
            stride: spec.stride,
            k: spec.k,
            radius: spec.radius,
            normalize: spec.normalize,
            fps: spec.fps,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().chain(&self.shortcut).map(Layer::param_count).sum()
    }

    /// Multiply-adds for one cloud of `points` input points.
    pub fn macs(&self, points: usize) -> u64 {
        let m = points / self.stride;
        self.layers.iter().map(|l| l.macs(m * self.k)).sum::<u64>() + self.shortcut.as_ref().map_or(0, |l| l.macs(m))
    }

    pub fn forward<T: Real, G: Graph<T>>(&self, g: &mut G, input: &StageFeatures<G::Var>) -> Result<StageFeatures<G::Var>> {
        let c = g.value(&input.features).cols();
        if c != self.cin {
            return Err(Error::dim(format!("set abstraction expects {} channels, got {c}", self.cin)));
        }
        let grp = group_batch(&input.positions, self.stride, self.radius, self.k, self.normalize, self.fps)?;
        let rel = Tensor::matrix(grp.index.len(), 3, grp.rel.iter().map(|&v| T::of(v as f64)).collect())?;
        let grouped = g.gather(&input.features, grp.index, Some(rel))?;
        let y = forward_all(&self.layers, g, &grouped)?;
        let mut y = g.max_reduce(&y, self.k)?;
        if self.residual {
            let mut skip = g.gather(&input.features, grp.center_rows, None)?;
            if let Some(s) = &self.shortcut {
                skip = s.forward(g, &skip)?;
            }
            let sum = g.add(&y, &skip)?;
            y = g.relu(&sum);
        }
        Ok(StageFeatures {
            positions: grp.centers,
            features: y,
            stage: input.stage + usize::from(self.stride > 1),
            radius: self.radius,
        })
    }
}
