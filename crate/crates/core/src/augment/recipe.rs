use rand::Rng;
use serde::{Deserialize, Serialize};

use super::transforms::*;
use crate::data::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Transform {
    Resample {
        n: usize,
        #[serde(default)]
        mode: ResampleMode,
    },
    Rotate {
        #[serde(default)]
        so3: bool,
    },
    Scale {
        lo: f32,
        hi: f32,
    },
    Translate {
        extent: f32,
    },
    Jitter {
        sigma: f32,
        clip: f32,
    },
    Height,
    ColorDrop {
        p: f32,
        #[serde(default)]
        per_point: bool,
    },
    AutoContrast {
        p: f32,
    },
}

fn one() -> f32 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(flatten)]
    pub transform: Transform,
    /// Chance that the step runs at all.
    #[serde(default = "one")]
    pub prob: f32,
}

impl From<Transform> for Step {
    fn from(transform: Transform) -> Self {
        Step { transform, prob: 1.0 }
    }
}

/// Ordered augmentation steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct AugmentRecipe {
    pub steps: Vec<Step>,
    /// Whole scenes are fed to the network instead of fixed-size crops.
    #[serde(default)]
    pub entire_scene: bool,
}

pub const RECIPE_PRESETS: [&str; 4] = ["none", "scanobjectnn-cls", "s3dis-seg", "shapenetpart"];

impl AugmentRecipe {
    pub fn preset(name: &str) -> Result<Self> {
        use Transform::*;
        let steps: Vec<Transform> = match name {
            "none" => vec![],
            "scanobjectnn-cls" => vec![
                Resample { n: 1024, mode: ResampleMode::Random },
                Rotate { so3: false },
                Scale { lo: 0.9, hi: 1.1 },
                Height,
            ],
            "s3dis-seg" => vec![
                Rotate { so3: false },
                Scale { lo: 0.9, hi: 1.1 },
                Jitter { sigma: 0.005, clip: 0.02 },
                Height,
                ColorDrop { p: 0.2, per_point: false },
                AutoContrast { p: 0.2 },
            ],
            "shapenetpart" => vec![Rotate { so3: false }, Scale { lo: 0.8, hi: 1.2 }, Jitter { sigma: 0.001, clip: 0.005 }, Height],
            _ => return Err(Error::Config(format!("unknown augmentation preset `{name}`; known: {}", RECIPE_PRESETS.join(", ")))),
        };
        Ok(AugmentRecipe { steps: steps.into_iter().map(Step::from).collect(), entire_scene: name == "s3dis-seg" })
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.steps {
            let inner = match s.transform {
                Transform::ColorDrop { p, .. } | Transform::AutoContrast { p } => p,
                _ => 0.0,
            };
            if !(0.0..=1.0).contains(&s.prob) || !(0.0..=1.0).contains(&inner) {
                return Err(Error::Config(format!("probabilities must lie in [0, 1] in {:?}", s)));
            }
        }
        Ok(())
    }

    /// Sets the point count of every resampling step.
    pub fn with_resample(mut self, n: usize) -> Self {
        for s in &mut self.steps {
            if let Transform::Resample { n: m, .. } = &mut s.transform {
                *m = n;
            }
        }
        self
    }

    /// Removes every step of the given kind, e.g. `color_drop`.
    pub fn without(mut self, op: &str) -> Self {
        self.steps.retain(|s| op_name(&s.transform) != op);
        self
    }
}

fn op_name(t: &Transform) -> &'static str {
    match t {
        Transform::Resample { .. } => "resample",
        Transform::Rotate { .. } => "rotate",
        Transform::Scale { .. } => "scale",
        Transform::Translate { .. } => "translate",
        Transform::Jitter { .. } => "jitter",
        Transform::Height => "height",
        Transform::ColorDrop { .. } => "color_drop",
        Transform::AutoContrast { .. } => "auto_contrast",
    }
}

pub fn apply_transform(cloud: &PointCloud, t: &Transform, rng: &mut impl Rng) -> Result<PointCloud> {
    Ok(match *t {
        Transform::Resample { n, mode } => resample_points(cloud, n, mode, rng)?,
        Transform::Rotate { so3 } => random_rotate(cloud, so3, rng),
        Transform::Scale { lo, hi } => random_scale(cloud, lo, hi, rng)?,
        Transform::Translate { extent } => random_translate(cloud, extent, rng),
        Transform::Jitter { sigma, clip } => jitter(cloud, sigma, clip, rng)?,
        Transform::Height => append_height(cloud),
        Transform::ColorDrop { p, per_point } => color_drop(cloud, p, per_point, rng),
        Transform::AutoContrast { p } => color_autocontrast(cloud, p, rng),
    })
}

/// Runs the steps in order; a step with `prob < 1` first draws whether it runs.
pub fn apply_recipe(cloud: &PointCloud, recipe: &AugmentRecipe, rng: &mut impl Rng) -> Result<PointCloud> {
    let mut out = cloud.clone();
    for s in &recipe.steps {
        if s.prob < 1.0 && rng.gen::<f32>() >= s.prob {
            continue;
        }
        out = apply_transform(&out, &s.transform, rng)?;
    }
    Ok(out)
}
