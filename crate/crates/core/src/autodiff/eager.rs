use std::rc::Rc;

use super::kernels;
use super::params::NORM_EPS;
use super::{Graph, NormId, NormUpdate, ParamId, ParamStore, Real, Tensor};
use crate::error::Result;

/// Value handle for [`Eager`]: parameters are borrowed from the store, results are shared.
#[derive(Clone, Debug)]
pub enum EagerVar<T> {
    Param(ParamId),
    Value(Rc<Tensor<T>>),
}

/// Forward-only executor. Intermediates are freed as soon as no handle refers to them.
pub struct Eager<'a, T: Real = f32> {
    store: &'a ParamStore<T>,
    training: bool,
    norm_updates: Vec<NormUpdate<T>>,
}

impl<'a, T: Real> Eager<'a, T> {
    pub fn new(store: &'a ParamStore<T>, training: bool) -> Self {
        Eager { store, training, norm_updates: Vec::new() }
    }

    pub fn take_norm_updates(&mut self) -> Vec<NormUpdate<T>> {
        std::mem::take(&mut self.norm_updates)
    }

    fn v<'s>(&'s self, v: &'s EagerVar<T>) -> &'s Tensor<T> {
        match v {
            EagerVar::Param(id) => self.store.tensor(*id),
            EagerVar::Value(t) => t,
        }
    }

    /// Takes the tensor out of a handle, cloning only when it is shared.
    pub fn into_tensor(&self, v: EagerVar<T>) -> Tensor<T> {
        match v {
            EagerVar::Param(id) => self.store.tensor(id).clone(),
            EagerVar::Value(t) => Rc::try_unwrap(t).unwrap_or_else(|t| (*t).clone()),
        }
    }
}

fn wrap<T>(t: Tensor<T>) -> EagerVar<T> {
    EagerVar::Value(Rc::new(t))
}

impl<'a, T: Real> Graph<T> for Eager<'a, T> {
    type Var = EagerVar<T>;

    fn training(&self) -> bool {
        self.training
    }

    fn store(&self) -> &ParamStore<T> {
        self.store
    }

    fn input(&mut self, t: Tensor<T>) -> EagerVar<T> {
        wrap(t)
    }

    fn param(&mut self, id: ParamId) -> EagerVar<T> {
        EagerVar::Param(id)
    }

    fn value<'s>(&'s self, v: &'s EagerVar<T>) -> &'s Tensor<T> {
        self.v(v)
    }

    fn affine(&mut self, x: &EagerVar<T>, w: &EagerVar<T>, b: Option<&EagerVar<T>>) -> Result<EagerVar<T>> {
        Ok(wrap(kernels::affine(self.v(x), self.v(w), b.map(|b| self.v(b)))?))
    }

    fn batch_norm(&mut self, x: &EagerVar<T>, gamma: &EagerVar<T>, beta: &EagerVar<T>, state: NormId) -> Result<EagerVar<T>> {
        let running = if self.training {
            None
        } else {
            let s = self.store.norm(state);
            Some((s.mean.as_slice(), s.var.as_slice()))
        };
        let f = kernels::batch_norm(self.v(x), self.v(gamma), self.v(beta), running, T::of(NORM_EPS))?;
        if let Some((mean, var)) = f.stats {
            self.norm_updates.push(NormUpdate { id: state, mean, var });
        }
        Ok(wrap(f.out))
    }

    fn relu(&mut self, x: &EagerVar<T>) -> EagerVar<T> {
        wrap(kernels::relu(self.v(x)))
    }

    fn max_reduce(&mut self, x: &EagerVar<T>, k: usize) -> Result<EagerVar<T>> {
        Ok(wrap(kernels::max_reduce(self.v(x), k)?.0))
    }

    fn gather(&mut self, x: &EagerVar<T>, index: Vec<u32>, extra: Option<Tensor<T>>) -> Result<EagerVar<T>> {
        Ok(wrap(kernels::gather(self.v(x), &index, extra.as_ref())?))
    }

    fn weighted_gather(&mut self, x: &EagerVar<T>, index: Vec<u32>, weights: Vec<T>, fan: usize) -> Result<EagerVar<T>> {
        Ok(wrap(kernels::weighted_gather(self.v(x), &index, &weights, fan)?))
    }

    fn concat(&mut self, a: &EagerVar<T>, b: &EagerVar<T>) -> Result<EagerVar<T>> {
        Ok(wrap(kernels::concat_cols(self.v(a), self.v(b))?))
    }

    fn add(&mut self, a: &EagerVar<T>, b: &EagerVar<T>) -> Result<EagerVar<T>> {
        Ok(wrap(kernels::add(self.v(a), self.v(b))?))
    }

    fn mul_const(&mut self, x: &EagerVar<T>, c: Vec<T>) -> Result<EagerVar<T>> {
        Ok(wrap(kernels::mul_const(self.v(x), &c)?))
    }

    fn cross_entropy(&mut self, logits: &EagerVar<T>, targets: &[usize], eps: T, weights: Option<&[T]>) -> Result<EagerVar<T>> {
        let r = kernels::smoothed_cross_entropy(self.v(logits), targets, eps, weights)?;
        Ok(wrap(Tensor::scalar(r.value)))
    }

    fn poly_focal(
        &mut self,
        logits: &EagerVar<T>,
        targets: &[usize],
        gamma: T,
        alpha: T,
        eps1: T,
        weights: Option<&[T]>,
    ) -> Result<EagerVar<T>> {
        let r = kernels::poly_focal(self.v(logits), targets, gamma, alpha, eps1, weights)?;
        Ok(wrap(Tensor::scalar(r.value)))
    }

    fn sum_squares(&mut self, x: &EagerVar<T>) -> EagerVar<T> {
        wrap(Tensor::scalar(kernels::sum_squares(self.v(x)).value))
    }

    fn dot_const(&mut self, x: &EagerVar<T>, c: Vec<T>) -> Result<EagerVar<T>> {
        Ok(wrap(Tensor::scalar(kernels::dot_const(self.v(x), &c)?.value)))
    }
}
