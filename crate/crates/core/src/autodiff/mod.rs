//! Minimal reverse-mode automatic differentiation over dense row-major tensors.

mod eager;
pub mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use eager::{Eager, EagerVar};
pub use gradcheck::{check_store, finite_diff_check, GradCheckReport};
pub use graph::Graph;
pub use params::{NormId, NormState, NormUpdate, Param, ParamId, ParamStore, NORM_EPS, NORM_MOMENTUM};
pub use scalar::Real;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
