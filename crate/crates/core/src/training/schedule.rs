use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning rate as a function of training progress. Time is measured in epochs and may
/// be fractional, so step-wise updates within an epoch see a smooth cosine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Constant,
    Step { period: f64, rate: f64 },
    MultiStep { milestones: Vec<f64>, rate: f64 },
    Cosine { lr_min: f64 },
}

impl ScheduleSpec {
    pub fn validate(&self, lr0: f64) -> Result<()> {
        match self {
            ScheduleSpec::Step { period, .. } if !(*period > 0.0) => Err(Error::Config("step period must be positive".into())),
            ScheduleSpec::MultiStep { milestones, .. } if milestones.windows(2).any(|w| w[0] >= w[1]) => {
                Err(Error::Config("milestones must be strictly increasing".into()))
            }
            ScheduleSpec::Cosine { lr_min } if !(*lr_min >= 0.0 && *lr_min <= lr0) => {
                Err(Error::Config(format!("lr_min must lie in [0, {lr0}], got {lr_min}")))
            }
            _ => Ok(()),
        }
    }

    /// Learning rate at time `t` of `total`; `t` is clamped to `[0, total]`.
    pub fn lr_at(&self, lr0: f64, t: f64, total: f64) -> f64 {
        let t = t.clamp(0.0, total.max(0.0));
        match self {
            ScheduleSpec::Constant => lr0,
            ScheduleSpec::Step { period, rate } => lr0 * rate.powi((t / period).floor() as i32),
            ScheduleSpec::MultiStep { milestones, rate } => lr0 * rate.powi(milestones.iter().filter(|&&m| m <= t).count() as i32),
            ScheduleSpec::Cosine { lr_min } => {
                if total <= 0.0 {
                    return lr0;
                }
                lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (PI * t / total).cos())
            }
        }
    }
}
