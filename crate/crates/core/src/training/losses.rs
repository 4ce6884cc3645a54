use serde::{Deserialize, Serialize};

use crate::autodiff::{kernels, Graph, Real, Tensor};
use crate::error::{Error, Result};

fn gamma() -> f64 {
    2.0
}

fn alpha() -> f64 {
    0.25
}

fn eps1() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    CrossEntropy,
    SmoothedCe {
        eps: f64,
    },
    PolyFocal {
        #[serde(default = "gamma")]
        gamma: f64,
        #[serde(default = "alpha")]
        alpha: f64,
        #[serde(default = "eps1")]
        eps1: f64,
    },
}

impl LossSpec {
    pub fn poly_focal() -> Self {
        LossSpec::PolyFocal { gamma: gamma(), alpha: alpha(), eps1: eps1() }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::SmoothedCe { eps } if !(0.0..1.0).contains(&eps) => {
                Err(Error::Config(format!("label smoothing must lie in [0, 1), got {eps}")))
            }
            LossSpec::PolyFocal { gamma, .. } if !(gamma >= 0.0) => Err(Error::Config(format!("focal gamma must be ≥ 0, got {gamma}"))),
            _ => Ok(()),
        }
    }

    /// Records the loss of `logits` against `targets`; `weights` scales rows (0 drops a row).
    pub fn apply<T: Real, G: Graph<T>>(&self, g: &mut G, logits: &G::Var, targets: &[usize], weights: Option<&[T]>) -> Result<G::Var> {
        match *self {
            LossSpec::CrossEntropy => g.cross_entropy(logits, targets, T::zero(), weights),
            LossSpec::SmoothedCe { eps } => g.cross_entropy(logits, targets, T::of(eps), weights),
            LossSpec::PolyFocal { gamma, alpha, eps1 } => g.poly_focal(logits, targets, T::of(gamma), T::of(alpha), T::of(eps1), weights),
        }
    }
}

/// Mean cross-entropy against targets smoothed to `1 − ε` on the true class plus `ε/K`.
pub fn smoothed_cross_entropy<T: Real>(logits: &Tensor<T>, targets: &[usize], eps: T) -> Result<T> {
    Ok(kernels::smoothed_cross_entropy(logits, targets, eps, None)?.value)
}

/// Mean Poly-1 focal loss.
pub fn poly_focal<T: Real>(logits: &Tensor<T>, targets: &[usize], gamma: T, alpha: T, eps1: T) -> Result<T> {
    Ok(kernels::poly_focal(logits, targets, gamma, alpha, eps1, None)?.value)
}
