//! Training-time data augmentation and recipe composition.
//!
//! Every transform takes the cloud by reference and an explicit rng, and returns a new cloud.

mod recipe;
mod transforms;

pub use recipe::{apply_recipe, apply_transform, AugmentRecipe, Step, Transform, RECIPE_PRESETS};
pub use transforms::{
    append_height, color_autocontrast, color_drop, jitter, random_rotate, random_scale, random_translate, resample_points,
    rotate_z, ResampleMode,
};
