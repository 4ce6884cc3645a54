//! Evaluation metrics, voting evaluation and the throughput harness.

mod bench;
mod confusion;
mod voting;

pub use bench::{throughput_bench, ThroughputReport};
pub use confusion::{instance_mean_iou, ConfusionMatrix, ShapePrediction};
pub use voting::voting_eval;

#[cfg(test)]
mod tests;
