//! Spatial kernels: subsampling, neighbor queries, grouping, interpolation, voxelization.

mod group;
mod interpolate;
mod query;
mod sampling;
mod voxel;

pub use group::{group_relative, relative_positions};
pub use interpolate::{three_interpolate, three_nn_weights, InterpWeights, DISTANCE_FLOOR};
pub use query::{ball_query, knn_query, knn_with_distances, HashGrid, NeighborIndex};
pub use sampling::{farthest_point_sample, FpsStart};
pub use voxel::{crop_around, crop_fixed_count, voxel_downsample};

pub(crate) use sampling::dist2;
