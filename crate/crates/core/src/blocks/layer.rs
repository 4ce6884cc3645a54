use rand::Rng;

use crate::autodiff::{Graph, NormId, ParamId, ParamStore, Real, Tensor};
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct NormParams {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub state: NormId,
}

/// One shared-MLP layer: affine, then optional batch norm, then optional relu.
#[derive(Clone, Debug)]
pub struct Layer {
    pub cin: usize,
    pub cout: usize,
    pub w: ParamId,
    pub b: ParamId,
    pub norm: Option<NormParams>,
    pub relu: bool,
}

impl Layer {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, cin: usize, cout: usize, norm: bool, relu: bool, rng: &mut impl Rng) -> Self {
        let w = store.add_weight(format!("{name}.w"), cin, cout, rng);
        let b = store.add(format!("{name}.b"), Tensor::zeros(vec![cout]), true);
        let norm = norm.then(|| NormParams {
            gamma: store.add(format!("{name}.bn.gamma"), Tensor::full(vec![cout], T::one()), true),
            beta: store.add(format!("{name}.bn.beta"), Tensor::zeros(vec![cout]), true),
            state: store.add_norm(format!("{name}.bn"), cout),
        });
        Layer { cin, cout, w, b, norm, relu }
    }

    /// Trainable scalars of a layer with this shape.
    pub fn count(cin: usize, cout: usize, norm: bool) -> usize {
        cin * cout + cout + if norm { 2 * cout } else { 0 }
    }

    pub fn param_count(&self) -> usize {
        Self::count(self.cin, self.cout, self.norm.is_some())
    }

    /// Multiply-adds for `rows` input rows.
    pub fn macs(&self, rows: usize) -> u64 {
        rows as u64 * self.cin as u64 * self.cout as u64
    }

    pub fn forward<T: Real, G: Graph<T>>(&self, g: &mut G, x: &G::Var) -> Result<G::Var> {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let mut y = g.affine(x, &w, Some(&b))?;
        if let Some(n) = &self.norm {
            let gamma = g.param(n.gamma);
            let beta = g.param(n.beta);
            y = g.batch_norm(&y, &gamma, &beta, n.state)?;
        }
        if self.relu {
            y = g.relu(&y);
        }
        Ok(y)
    }
}

/// Layers applied in sequence.
pub fn forward_all<T: Real, G: Graph<T>>(layers: &[Layer], g: &mut G, x: &G::Var) -> Result<G::Var> {
    let mut y = x.clone();
    for l in layers {
        y = l.forward(g, &y)?;
    }
    Ok(y)
}

/// Inverted dropout: zeroes each entry with probability `p` and rescales the rest.
/// Identity outside training.
pub fn dropout<T: Real, G: Graph<T>>(g: &mut G, x: &G::Var, p: f32, rng: &mut impl Rng) -> Result<G::Var> {
    if !g.training() || p <= 0.0 {
        return Ok(x.clone());
    }
    let keep = T::of(1.0 / (1.0 - p as f64));
    let mask = (0..g.value(x).len()).map(|_| if rng.gen::<f32>() < p { T::zero() } else { keep }).collect();
    g.mul_const(x, mask)
}
