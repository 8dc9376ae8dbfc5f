//! Point sets, canonical samplers, set metrics, nearest-neighbor search and voxelization.

mod cloud;
mod kdtree;
mod metrics;
mod sampler;
mod voxel;

pub use cloud::PointCloud;
pub use kdtree::{brute_force_nn, sq_dist, NnIndex};
pub use metrics::{
    chamfer_asym, chamfer_asym_with, chamfer_sym, chamfer_sym_with, default_f1_tau, f1_score, nearest_all, Backend,
    F1Score,
};
pub use sampler::{CanonicalSampler, SamplerKind};
pub use voxel::{voxelize, voxelize_clipped, OccupancyGrid, VoxelIndex};
