//! Losses, optimizers, learning-rate schedules and the training loop.

mod config;
mod fit;
mod losses;
mod optim;
mod schedule;

pub use config::{DataSpec, ModelSpec, TrainConfig};
pub use fit::{evaluate, fit, task_metric, EpochRecord, FitReport};
pub use losses::{poly_focal, smoothed_cross_entropy, LossSpec};
pub use optim::{Optimizer, OptimizerKind, OptimizerSpec};
pub use schedule::ScheduleSpec;
