//! Model configuration, presets, assembly and accounting.

mod batch;
mod checkpoint;
mod config;
mod network;
mod summary;

pub use batch::Batch;
pub use config::{BlockKind, FeatureRecipe, ModelConfig, Task, PRESETS};
pub use network::{DepthBlock, EncoderStage, Model, Network};
pub use summary::{analytic_param_count, ModelSummary, StageRow};
