//! Point clouds, file formats, synthetic datasets and splits.

mod cloud;
pub(crate) mod npcd;
mod split;
mod synthetic;

pub use cloud::{Labels, Point, PointCloud};
pub use npcd::{decode_csv, decode_npcd, encode_csv, encode_npcd, read_cloud, read_dir, write_cloud, write_dir};
pub use split::{split, split_indices};
pub use synthetic::{generate_synthetic, spurious_color_benchmark, ColorMode, SyntheticKind, SyntheticSpec};

#[cfg(test)]
mod tests;
