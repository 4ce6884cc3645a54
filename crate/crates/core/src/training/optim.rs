use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, ParamId, ParamStore, Real};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    #[serde(rename = "adamw")]
    AdamW,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Base learning rate; the schedule scales it per step.
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub momentum: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec { kind: OptimizerKind::AdamW, lr: 1e-3, weight_decay: 1e-4, betas: (0.9, 0.999), eps: 1e-8, momentum: 0.9 }
    }
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.betas;
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0) || !(self.eps > 0.0) {
            return Err(Error::Config("weight decay must be ≥ 0 and eps > 0".into()));
        }
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("betas and momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Optimizer state: one moment buffer per parameter, shaped like the parameter.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub spec: OptimizerSpec,
    pub steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec) -> Self {
        Optimizer { spec, steps: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first
    }

    /// One update at learning rate `lr`. Parameters flagged `no_decay` skip weight decay.
    pub fn step<T: Real>(&mut self, store: &mut ParamStore<T>, grads: &Gradients<T>, lr: f64) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::Contract(format!("{} gradients for {} parameters", grads.len(), store.len())));
        }
        if self.first.is_empty() {
            self.first = store.params().iter().map(|p| vec![0.0; p.tensor.len()]).collect();
            if self.spec.kind != OptimizerKind::Sgd {
                self.second = self.first.clone();
            }
        }
        for (i, p) in store.params().iter().enumerate() {
            if self.first[i].len() != p.tensor.len() || grads.get(ParamId(i)).is_some_and(|g| g.len() != p.tensor.len()) {
                return Err(Error::Contract(format!("gradient shape mismatch for {}", p.name)));
            }
        }
        self.steps += 1;
        let s = self.spec.clone();
        let (b1, b2) = s.betas;
        let t = self.steps as i32;
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        for i in 0..store.len() {
            let id = ParamId(i);
            let g = grads.get(id).map(|g| g.to_vec());
            let param = &mut store.params_mut()[i];
            let wd = if param.no_decay { 0.0 } else { s.weight_decay };
            let m = &mut self.first[i];
            let w = param.tensor.data_mut();
            match s.kind {
                OptimizerKind::Sgd => {
                    for j in 0..w.len() {
                        let x = w[j].to_f64().unwrap();
                        let gj = g.as_ref().map_or(0.0, |g| g[j].to_f64().unwrap()) + wd * x;
                        m[j] = s.momentum * m[j] + gj;
                        w[j] = T::of(x - lr * m[j]);
                    }
                }
                OptimizerKind::Adam | OptimizerKind::AdamW => {
                    let v = &mut self.second[i];
                    let decoupled = s.kind == OptimizerKind::AdamW;
                    for j in 0..w.len() {
                        let mut x = w[j].to_f64().unwrap();
                        let mut gj = g.as_ref().map_or(0.0, |g| g[j].to_f64().unwrap());
                        if decoupled {
                            x -= lr * wd * x;
                        } else {
                            gj += wd * x;
                        }
                        m[j] = b1 * m[j] + (1.0 - b1) * gj;
                        v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                        let update = (m[j] / c1) / ((v[j] / c2).sqrt() + s.eps);
                        w[j] = T::of(x - lr * update);
                    }
                }
            }
        }
        Ok(())
    }
}
