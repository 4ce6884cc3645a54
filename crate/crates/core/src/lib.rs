//! Point-cloud set-abstraction networks (PointNet++ and PointNeXt variants) on a
//! small reverse-mode autodiff engine, with spatial kernels, augmentation, training
//! and evaluation utilities.

pub mod augment;
pub mod autodiff;
pub mod blocks;
pub mod data;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod training;

pub use autodiff::{Eager, Graph, ParamStore, Tape, Tensor};
pub use data::{Labels, Point, PointCloud};
pub use error::{Error, Result};
