use super::{NormId, ParamId, ParamStore, Real, Tensor};
use crate::error::Result;

/// The differentiable operations the network needs.
///
/// Implemented by [`Tape`](super::Tape), which records for reverse-mode
/// differentiation, and by [`Eager`](super::Eager), which evaluates and forgets.
/// Blocks are written once against this trait.
pub trait Graph<T: Real> {
    type Var: Clone;

    /// Whether normalization uses batch statistics and dropout is active.
    fn training(&self) -> bool;

    fn store(&self) -> &ParamStore<T>;

    fn input(&mut self, t: Tensor<T>) -> Self::Var;

    fn param(&mut self, id: ParamId) -> Self::Var;

    fn value<'s>(&'s self, v: &'s Self::Var) -> &'s Tensor<T>;

    /// `x [N,Cin] · w [Cin,Cout] + b [Cout]`.
    fn affine(&mut self, x: &Self::Var, w: &Self::Var, b: Option<&Self::Var>) -> Result<Self::Var>;

    /// Per-channel normalization over rows of `x [N,C]`; running state `state`.
    fn batch_norm(&mut self, x: &Self::Var, gamma: &Self::Var, beta: &Self::Var, state: NormId) -> Result<Self::Var>;

    fn relu(&mut self, x: &Self::Var) -> Self::Var;

    /// Max over consecutive groups of `k` rows.
    fn max_reduce(&mut self, x: &Self::Var, k: usize) -> Result<Self::Var>;

    /// Row gather with optional constant columns appended.
    fn gather(&mut self, x: &Self::Var, index: Vec<u32>, extra: Option<Tensor<T>>) -> Result<Self::Var>;

    /// Fixed fan-in weighted row gather (interpolation).
    fn weighted_gather(&mut self, x: &Self::Var, index: Vec<u32>, weights: Vec<T>, fan: usize) -> Result<Self::Var>;

    fn concat(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;

    fn add(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;

    /// Elementwise product with a constant (dropout masks).
    fn mul_const(&mut self, x: &Self::Var, c: Vec<T>) -> Result<Self::Var>;

    fn cross_entropy(&mut self, logits: &Self::Var, targets: &[usize], eps: T, weights: Option<&[T]>) -> Result<Self::Var>;

    fn poly_focal(
        &mut self,
        logits: &Self::Var,
        targets: &[usize],
        gamma: T,
        alpha: T,
        eps1: T,
        weights: Option<&[T]>,
    ) -> Result<Self::Var>;

    fn sum_squares(&mut self, x: &Self::Var) -> Self::Var;

    fn dot_const(&mut self, x: &Self::Var, c: Vec<T>) -> Result<Self::Var>;
}
