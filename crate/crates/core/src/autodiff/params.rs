use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle of a trainable tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle of a batch-normalization running state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NormId(pub(crate) usize);

/// Running mean/variance of one normalization layer. Not trainable.
#[derive(Clone, Debug, PartialEq)]
pub struct NormState<T> {
    pub name: String,
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub tensor: Tensor<T>,
    /// Excluded from weight decay (biases and normalization affine terms).
    pub no_decay: bool,
}

/// Batch statistics observed during a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct NormUpdate<T> {
    pub id: NormId,
    pub mean: Vec<T>,
    /// Unbiased batch variance.
    pub var: Vec<T>,
}

/// Owner of every parameter tensor and normalization state of a model.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T = f32> {
    params: Vec<Param<T>>,
    norms: Vec<NormState<T>>,
}

pub const NORM_MOMENTUM: f64 = 0.1;
pub const NORM_EPS: f64 = 1e-5;

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new(), norms: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>, no_decay: bool) -> ParamId {
        self.params.push(Param { name: name.into(), tensor, no_decay });
        ParamId(self.params.len() - 1)
    }

    /// Kaiming-uniform weight `[fan_in, fan_out]`.
    pub fn add_weight(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> ParamId {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let data = (0..fan_in * fan_out).map(|_| T::of(dist.sample(rng))).collect();
        self.add(name, Tensor::new(vec![fan_in, fan_out], data).unwrap(), false)
    }

    pub fn add_norm(&mut self, name: impl Into<String>, channels: usize) -> NormId {
        self.norms.push(NormState {
            name: name.into(),
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        });
        NormId(self.norms.len() - 1)
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].tensor
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].tensor
    }

    pub fn param(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn norm(&self, id: NormId) -> &NormState<T> {
        &self.norms[id.0]
    }

    pub fn norm_mut(&mut self, id: NormId) -> &mut NormState<T> {
        &mut self.norms[id.0]
    }

    pub fn norms(&self) -> &[NormState<T>] {
        &self.norms
    }

    pub fn norms_mut(&mut self) -> &mut [NormState<T>] {
        &mut self.norms
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Sum of element counts over trainable tensors.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Exponential moving average of running statistics.
    pub fn apply_norm_updates(&mut self, updates: &[NormUpdate<T>]) {
        let m = T::of(NORM_MOMENTUM);
        for u in updates {
            let state = &mut self.norms[u.id.0];
            for (r, &b) in state.mean.iter_mut().zip(&u.mean) {
                *r = (T::one() - m) * *r + m * b;
            }
            for (r, &b) in state.var.iter_mut().zip(&u.var) {
                *r = (T::one() - m) * *r + m * b;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.clear_grad();
        }
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64().unwrap()).unwrap()).collect();
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param { name: p.name.clone(), tensor: p.tensor.cast(), no_decay: p.no_decay })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| NormState { name: n.name.clone(), mean: conv(&n.mean), var: conv(&n.var) })
                .collect(),
        }
    }

    /// Copies values from `other`, matching tensors by position and shape.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        if other.params.len() != self.params.len() || other.norms.len() != self.norms.len() {
            return Err(Error::Contract("parameter layouts differ".into()));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.tensor.shape() != src.tensor.shape() {
                return Err(Error::Contract(format!("shape mismatch for {}", dst.name)));
            }
            dst.tensor.data_mut().copy_from_slice(src.tensor.data());
        }
        for (dst, src) in self.norms.iter_mut().zip(&other.norms) {
            dst.mean.clone_from(&src.mean);
            dst.var.clone_from(&src.var);
        }
        Ok(())
    }
}
