use super::PointCloud;
use crate::error::{Error, Result};

pub type VoxelIndex = [usize; 3];

/// `n^3` occupancy lattice over the world box `[-1, 1]^3`; voxel side `2/n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    n: usize,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(n: usize) -> Self {
        assert!(n > 0, "grid side must be positive");
        OccupancyGrid { n, occupied: vec![false; n * n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn voxel_size(&self) -> f64 {
        2.0 / self.n as f64
    }

    fn flat(&self, v: VoxelIndex) -> usize {
        (v[0] * self.n + v[1]) * self.n + v[2]
    }

    pub fn contains(&self, v: VoxelIndex) -> bool {
        v.iter().all(|&c| c < self.n)
    }

    pub fn is_occupied(&self, v: VoxelIndex) -> bool {
        self.occupied[self.flat(v)]
    }

    pub fn set(&mut self, v: VoxelIndex, occ: bool) {
        let i = self.flat(v);
        self.occupied[i] = occ;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn occupied_voxels(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        let n = self.n;
        self.occupied.iter().enumerate().filter(|(_, &o)| o).map(move |(i, _)| [i / (n * n), (i / n) % n, i % n])
    }

    /// World coordinate to cell index along one axis, `clamp(floor((x+1) n/2), 0, n-1)`.
    pub fn axis_index(&self, x: f64) -> usize {
        let i = ((x + 1.0) * self.n as f64 / 2.0).floor();
        (i.max(0.0) as usize).min(self.n - 1)
    }

    /// Inclusive bounding box of occupied voxels, `None` when empty.
    pub fn bounding_box(&self) -> Option<(VoxelIndex, VoxelIndex)> {
        let mut it = self.occupied_voxels();
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for v in it {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        Some((lo, hi))
    }

    /// Grid with the occupied bounding box filled solid.
    pub fn filled_bounding_box(&self) -> OccupancyGrid {
        let mut out = OccupancyGrid::empty(self.n);
        if let Some((lo, hi)) = self.bounding_box() {
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        out.set([i, j, k], true);
                    }
                }
            }
        }
        out
    }

    /// `self ⊆ other` as voxel sets.
    pub fn is_subset_of(&self, other: &OccupancyGrid) -> bool {
        self.n == other.n && self.occupied.iter().zip(&other.occupied).all(|(&a, &b)| !a || b)
    }
}

/// Marks every voxel that contains at least one point. Points must lie in `[-1, 1]^3`.
pub fn voxelize(cloud: &PointCloud, n: usize) -> Result<OccupancyGrid> {
    if cloud.dim() != 3 {
        return Err(Error::shape(format!("voxelize needs 3-D points, got {}", cloud.dim())));
    }
    if n == 0 {
        return Err(Error::Precondition("grid side must be positive".into()));
    }
    let mut grid = OccupancyGrid::empty(n);
    for p in cloud.iter() {
        if p.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Bounds(format!("{p:?} outside [-1,1]^3")));
        }
        let v = [grid.axis_index(p[0]), grid.axis_index(p[1]), grid.axis_index(p[2])];
        grid.set(v, true);
    }
    Ok(grid)
}

/// Like [`voxelize`] but drops points outside the world box; returns the drop count.
pub fn voxelize_clipped(cloud: &PointCloud, n: usize) -> Result<(OccupancyGrid, usize)> {
    if cloud.dim() != 3 {
        return Err(Error::shape(format!("voxelize needs 3-D points, got {}", cloud.dim())));
    }
    let kept: Vec<f64> =
        cloud.iter().filter(|p| p.iter().all(|v| (-1.0..=1.0).contains(v))).flatten().copied().collect();
    let dropped = cloud.len() - kept.len() / 3;
    let grid = voxelize(&PointCloud::new(3, kept)?, n)?;
    Ok((grid, dropped))
}
