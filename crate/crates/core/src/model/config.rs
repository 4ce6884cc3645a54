use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FpsStart;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Segmentation,
}

/// Which per-point input channels feed the network, in this order:
/// positions, colors, normals, height.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FeatureRecipe {
    pub positions: bool,
    pub colors: bool,
    pub normals: bool,
    pub height: bool,
}

impl FeatureRecipe {
    pub fn width(&self) -> usize {
        3 * usize::from(self.positions) + 3 * usize::from(self.colors) + 3 * usize::from(self.normals) + usize::from(self.height)
    }
}

/// Extra per-stage blocks after each set abstraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    #[default]
    InvResMlp,
    /// Stride-1 set abstraction blocks (naive depth scaling).
    SetAbstraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub name: String,
    pub task: Task,
    /// Stem width C; stage `i` has width `C · 2^(i+1)`.
    pub width: usize,
    /// Extra blocks per stage.
    pub blocks: [usize; 4],
    /// Query radius of the first stage.
    pub radius: f32,
    /// Radius multiplier from one stage to the next.
    pub radius_scaling: f32,
    pub k: usize,
    pub strides: [usize; 4],
    pub num_classes: usize,
    pub features: FeatureRecipe,
    pub stem: bool,
    /// Layers per set abstraction MLP; by default 2 when every `blocks` entry is 0, else 1.
    pub sa_layers: Option<usize>,
    /// Residual inside set abstraction; by default on when every `blocks` entry is 0.
    pub sa_residual: Option<bool>,
    pub block_kind: BlockKind,
    /// Divide relative positions by the query radius.
    pub normalize_dp: bool,
    pub expansion: usize,
    pub fps_start: FpsStart,
    pub dropout: f32,
    /// Parameter initialization seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::pointnext(Task::Classification, "pointnext-s", 32, [0; 4])
    }
}

pub const PRESETS: [&str; 8] =
    ["pointnext-s", "pointnext-b", "pointnext-l", "pointnext-xl", "pointnet2-baseline", "naive-width", "naive-depth", "naive-compound"];

impl ModelConfig {
    fn pointnext(task: Task, name: &str, width: usize, blocks: [usize; 4]) -> Self {
        let cls = task == Task::Classification;
        ModelConfig {
            name: name.into(),
            task,
            width,
            blocks,
            radius: if cls { 0.15 } else { 0.1 },
            radius_scaling: 2.0,
            k: 32,
            strides: if cls { [2; 4] } else { [4; 4] },
            num_classes: if cls { 15 } else { 13 },
            features: if cls {
                FeatureRecipe { positions: true, height: true, ..Default::default() }
            } else {
                FeatureRecipe { colors: true, height: true, ..Default::default() }
            },
            stem: true,
            sa_layers: None,
            sa_residual: None,
            block_kind: BlockKind::InvResMlp,
            normalize_dp: true,
            expansion: 4,
            fps_start: FpsStart::default(),
            dropout: 0.5,
            seed: 0,
        }
    }

    fn baseline(task: Task, name: &str, width: usize, blocks: [usize; 4]) -> Self {
        ModelConfig {
            stem: false,
            sa_layers: Some(3),
            sa_residual: Some(false),
            block_kind: BlockKind::SetAbstraction,
            normalize_dp: false,
            ..Self::pointnext(task, name, width, blocks)
        }
    }

    pub fn preset(name: &str, task: Task) -> Result<Self> {
        Ok(match name {
            "pointnext-s" => Self::pointnext(task, name, 32, [0; 4]),
            "pointnext-b" => Self::pointnext(task, name, 32, [1, 2, 1, 1]),
            "pointnext-l" => Self::pointnext(task, name, 32, [2, 4, 2, 2]),
            "pointnext-xl" => Self::pointnext(task, name, 64, [3, 6, 3, 3]),
            "pointnet2-baseline" => Self::baseline(task, name, 32, [0; 4]),
            "naive-width" => Self::baseline(task, name, 256, [0; 4]),
            "naive-depth" => Self::baseline(task, name, 32, [3, 6, 3, 3]),
            "naive-compound" => Self::baseline(task, name, 64, [3, 6, 3, 3]),
            _ => return Err(Error::Config(format!("unknown preset `{name}`; known: {}", PRESETS.join(", ")))),
        })
    }

    pub fn with_blocks(mut self, blocks: [usize; 4]) -> Self {
        self.blocks = blocks;
        self
    }

    pub fn with_classes(mut self, classes: usize) -> Self {
        self.num_classes = classes;
        self
    }

    pub fn stage_widths(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|i| self.width << (i + 1))
    }

    pub fn stage_radii(&self) -> [f32; 4] {
        [0, 1, 2, 3].map(|i| self.radius * self.radius_scaling.powi(i))
    }

    pub fn effective_sa_layers(&self) -> usize {
        self.sa_layers.unwrap_or(if self.blocks.iter().all(|&b| b == 0) { 2 } else { 1 })
    }

    pub fn effective_sa_residual(&self) -> bool {
        self.sa_residual.unwrap_or(self.blocks.iter().all(|&b| b == 0))
    }

    /// Width of the features entering the first set abstraction.
    pub fn level0_width(&self) -> usize {
        if self.stem {
            self.width
        } else {
            self.features.width()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 {
            return bad("width must be positive".into());
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.radius_scaling > 0.0) {
            return bad(format!("radius_scaling must be positive, got {}", self.radius_scaling));
        }
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.strides.contains(&0) {
            return bad("strides must be positive".into());
        }
        if self.num_classes < 2 {
            return bad("at least two classes are needed".into());
        }
        if self.features.width() == 0 {
            return bad("the feature recipe selects no input channels".into());
        }
        if !(1..=3).contains(&self.effective_sa_layers()) {
            return bad(format!("sa_layers must be 1 to 3, got {}", self.effective_sa_layers()));
        }
        if self.expansion == 0 {
            return bad("expansion must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}
