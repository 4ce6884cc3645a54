use rand::Rng;

use super::layer::{dropout, forward_all, Layer};
use super::stage::{uniform_points, StageFeatures};
use crate::autodiff::{Graph, ParamStore, Real, Tensor};
use crate::error::Result;

/// Pointwise MLP over `[x ; p]` followed by a global max over each cloud.
#[derive(Clone, Debug)]
pub struct GlobalBlock {
    pub layers: Vec<Layer>,
}

impl GlobalBlock {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize, rng: &mut impl Rng) -> Self {
        let layers = vec![
            Layer::new(store, &format!("{name}.mlp0"), channels + 3, channels, true, true, rng),
            Layer::new(store, &format!("{name}.mlp1"), channels, channels, true, true, rng),
        ];
        GlobalBlock { layers }
    }

    pub fn count(channels: usize) -> usize {
        Layer::count(channels + 3, channels, true) + Layer::count(channels, channels, true)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn macs(&self, points: usize) -> u64 {
        self.layers.iter().map(|l| l.macs(points)).sum()
    }

    /// `[batch, C]` pooled features.
    pub fn forward<T: Real, G: Graph<T>>(&self, g: &mut G, input: &StageFeatures<G::Var>) -> Result<G::Var> {
        let p = uniform_points(&input.positions)?;
        let rows = input.batch() * p;
        let pos = input.positions.iter().flatten().flatten().map(|&v| T::of(v as f64)).collect();
        let pos = g.input(Tensor::matrix(rows, 3, pos)?);
        let x = g.concat(&input.features, &pos)?;
        let y = forward_all(&self.layers, g, &x)?;
        g.max_reduce(&y, p)
    }
}

/// Hidden layers with dropout, then a plain affine output layer.
#[derive(Clone, Debug)]
pub struct Head {
    pub hidden: Vec<Layer>,
    pub out: Layer,
    pub dropout: f32,
}

impl Head {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, cin: usize, hidden: &[usize], classes: usize, dropout: f32, rng: &mut impl Rng) -> Self {
        let mut c = cin;
        let mut layers = Vec::new();
        for (i, &h) in hidden.iter().enumerate() {
            layers.push(Layer::new(store, &format!("{name}.mlp{i}"), c, h, true, true, rng));
            c = h;
        }
        let out = Layer::new(store, &format!("{name}.out"), c, classes, false, false, rng);
        Head { hidden: layers, out, dropout }
    }

    pub fn count(cin: usize, hidden: &[usize], classes: usize) -> usize {
        let mut c = cin;
        let mut n = 0;
        for &h in hidden {
            n += Layer::count(c, h, true);
            c = h;
        }
        n + Layer::count(c, classes, false)
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(Layer::param_count).sum::<usize>() + self.out.param_count()
    }

    pub fn macs(&self, rows: usize) -> u64 {
        self.hidden.iter().map(|l| l.macs(rows)).sum::<u64>() + self.out.macs(rows)
    }

    /// Logits `[rows, classes]`.
    pub fn forward<T: Real, G: Graph<T>>(&self, g: &mut G, x: &G::Var, rng: &mut impl Rng) -> Result<G::Var> {
        let mut y = x.clone();
        for l in &self.hidden {
            y = l.forward(g, &y)?;
            y = dropout(g, &y, self.dropout, rng)?;
        }
        self.out.forward(g, &y)
    }
}
