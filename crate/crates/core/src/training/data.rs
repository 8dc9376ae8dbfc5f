use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::seeding::{item_seed, rng_for, Stream};

use super::shapes::{ShapeKind, SynthShape};

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub shape: SynthShape,
    pub raster: Vec<f64>,
    pub gt: PointCloud,
}

/// `count` shapes with 32x32 silhouettes; kinds cycle through [`ShapeKind::ALL`].
pub fn gen_dataset(count: usize, seed: u64, gt_points: usize) -> Result<Vec<Sample>> {
    gen_dataset_with(count, seed, gt_points, 32)
}

pub fn gen_dataset_with(count: usize, seed: u64, gt_points: usize, raster_side: usize) -> Result<Vec<Sample>> {
    if count == 0 || gt_points == 0 || raster_side == 0 {
        return Err(Error::Precondition("count, gt_points and raster_side must be positive".into()));
    }
    Ok((0..count)
        .map(|i| {
            let kind = ShapeKind::ALL[i % ShapeKind::ALL.len()];
            let shape = SynthShape::random(kind, item_seed(seed, Stream::Dataset, i as u64));
            let mut rng = rng_for(shape.seed, Stream::Dataset);
            let gt = shape.sample_surface(&mut rng, gt_points).with_label(format!("{kind}-{i}"));
            let raster = shape.silhouette(raster_side);
            Sample { shape, raster, gt }
        })
        .collect())
}
