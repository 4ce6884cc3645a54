use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LossSpec, OptimizerSpec, ScheduleSpec};
use crate::augment::AugmentRecipe;
use crate::data::{generate_synthetic, read_dir, spurious_color_benchmark, split, ColorMode, PointCloud, SyntheticKind, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Task};

/// A preset name with a few common overrides, or a complete configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset {
        preset: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocks: Option<[usize; 4]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Full(ModelConfig),
}

impl ModelSpec {
    pub fn preset(name: &str) -> Self {
        ModelSpec::Preset { preset: name.into(), num_classes: None, blocks: None, width: None, seed: None }
    }

    pub fn resolve(&self, task: Task) -> Result<ModelConfig> {
        let cfg = match self {
            ModelSpec::Full(cfg) => cfg.clone(),
            ModelSpec::Preset { preset, num_classes, blocks, width, seed } => {
                let mut cfg = ModelConfig::preset(preset, task)?;
                if let Some(k) = num_classes {
                    cfg.num_classes = *k;
                }
                if let Some(b) = blocks {
                    cfg.blocks = *b;
                }
                if let Some(c) = width {
                    cfg.width = *c;
                }
                if let Some(s) = seed {
                    cfg.seed = *s;
                }
                cfg
            }
        };
        if cfg.task != task {
            return Err(Error::Config(format!("model task {:?} differs from training task {task:?}", cfg.task)));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Where training and validation clouds come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSpec {
    /// Directories of `.npcd` / `.csv` files.
    Dir { train: PathBuf, val: Option<PathBuf> },
    /// Generated clouds, split into train/val by `val_fraction` (stratified for `cls3`).
    Synthetic {
        kind: SyntheticKind,
        count: usize,
        points: usize,
        #[serde(default)]
        noise: f32,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        colors: ColorMode,
        #[serde(default)]
        val_fraction: f64,
    },
    /// `parts2` clouds with label-coded colors for training and random colors for validation.
    SpuriousColor {
        train: usize,
        val: usize,
        points: usize,
        #[serde(default)]
        noise: f32,
        #[serde(default)]
        seed: u64,
    },
}

impl DataSpec {
    /// Loads `(train, val)`; relative directories resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<(Vec<PointCloud>, Vec<PointCloud>)> {
        match self {
            DataSpec::Dir { train, val } => {
                let t = read_dir(base.join(train))?;
                let v = match val {
                    Some(v) => read_dir(base.join(v))?,
                    None => Vec::new(),
                };
                Ok((t, v))
            }
            &DataSpec::Synthetic { kind, count, points, noise, seed, colors, val_fraction } => {
                let all = generate_synthetic(&SyntheticSpec { kind, count, points, noise, seed, colors })?;
                if val_fraction <= 0.0 {
                    return Ok((all, Vec::new()));
                }
                split(&all, (1.0 - val_fraction, val_fraction), seed)
            }
            &DataSpec::SpuriousColor { train, val, points, noise, seed } => spurious_color_benchmark(train, val, points, noise, seed),
        }
    }
}

/// Everything `fit` needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub model: ModelSpec,
    pub data: DataSpec,
    pub augment: AugmentRecipe,
    pub loss: LossSpec,
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    pub epochs: usize,
    pub batch_size: usize,
    /// Passes over the training set per epoch.
    pub repeat: usize,
    pub seed: u64,
    /// Stop once the epoch's training metric reaches this value.
    pub stop_at_train_metric: Option<f64>,
    /// JSON-lines metrics log.
    pub log: Option<PathBuf>,
}

impl TrainConfig {
    pub fn defaults(task: Task) -> Self {
        let base = TrainConfig {
            task,
            model: ModelSpec::preset("pointnext-s"),
            data: DataSpec::Synthetic {
                kind: SyntheticKind::Cls3,
                count: 200,
                points: 512,
                noise: 0.01,
                seed: 0,
                colors: ColorMode::Random,
                val_fraction: 0.0,
            },
            augment: AugmentRecipe::default(),
            loss: LossSpec::SmoothedCe { eps: 0.3 },
            optimizer: OptimizerSpec::default(),
            schedule: ScheduleSpec::Cosine { lr_min: 0.0 },
            epochs: 100,
            batch_size: 32,
            repeat: 1,
            seed: 0,
            stop_at_train_metric: None,
            log: None,
        };
        match task {
            Task::Classification => TrainConfig {
                augment: AugmentRecipe::preset("scanobjectnn-cls").unwrap(),
                optimizer: OptimizerSpec { weight_decay: 0.05, ..OptimizerSpec::default() },
                ..base
            },
            Task::Segmentation => TrainConfig {
                data: DataSpec::Synthetic {
                    kind: SyntheticKind::Parts2,
                    count: 64,
                    points: 512,
                    noise: 0.01,
                    seed: 0,
                    colors: ColorMode::Random,
                    val_fraction: 0.0,
                },
                augment: AugmentRecipe::preset("s3dis-seg").unwrap(),
                loss: LossSpec::SmoothedCe { eps: 0.2 },
                optimizer: OptimizerSpec { lr: 1e-2, ..OptimizerSpec::default() },
                ..base
            },
        }
    }

    /// Parses a JSON object; top-level keys absent from it take the defaults of its `task`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value.as_object().ok_or_else(|| Error::Config("training config must be a JSON object".into()))?;
        let task: Task = match obj.get("task") {
            Some(t) => serde_json::from_value(t.clone())?,
            None => return Err(Error::Config("training config needs a `task`".into())),
        };
        let mut merged = serde_json::to_value(Self::defaults(task))?;
        let slots = merged.as_object_mut().unwrap();
        for (k, v) in obj {
            if !slots.contains_key(k) {
                return Err(Error::Config(format!("unknown training config key `{k}`")));
            }
            slots.insert(k.clone(), v.clone());
        }
        let cfg: TrainConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.repeat == 0 {
            return Err(Error::Config("epochs, batch_size and repeat must be ≥ 1".into()));
        }
        if let Some(m) = self.stop_at_train_metric {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::Config(format!("stop_at_train_metric must lie in [0, 1], got {m}")));
            }
        }
        self.loss.validate()?;
        self.optimizer.validate()?;
        self.schedule.validate(self.optimizer.lr)?;
        self.augment.validate()
    }
}
