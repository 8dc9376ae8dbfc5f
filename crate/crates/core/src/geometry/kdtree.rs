//! Exact nearest-neighbor search with a balanced k-d tree.
//!
//! Ties are broken toward the lowest point id, matching [`brute_force_nn`], so
//! both backends return the same neighbor for every query.

use super::PointCloud;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    point: u32,
    split_dim: u8,
    split: f64,
    left: u32,
    right: u32,
}

/// Balanced k-d tree over a copy of a point cloud.
#[derive(Debug, Clone)]
pub struct NnIndex {
    dim: usize,
    coords: Vec<f64>,
    nodes: Vec<Node>,
    root: u32,
}

/// Squared Euclidean distance. Both backends use this exact expression.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Linear scan; returns `(id, squared distance)` of the lowest-id nearest point.
pub fn brute_force_nn(cloud: &PointCloud, q: &[f64]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in cloud.iter().enumerate() {
        let d = sq_dist(q, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

impl NnIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        let dim = cloud.dim();
        let coords = cloud.coords().to_vec();
        let mut ids: Vec<u32> = (0..cloud.len() as u32).collect();
        let mut idx = NnIndex { dim, coords, nodes: Vec::with_capacity(ids.len()), root: NONE };
        idx.root = idx.build_rec(&mut ids);
        idx
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn coord(&self, id: u32, d: usize) -> f64 {
        self.coords[id as usize * self.dim + d]
    }

    fn build_rec(&mut self, ids: &mut [u32]) -> u32 {
        if ids.is_empty() {
            return NONE;
        }
        // split on the dimension of widest spread
        let mut split_dim = 0;
        let mut widest = -1.0;
        for d in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in ids.iter() {
                let v = self.coord(i, d);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > widest {
                widest = hi - lo;
                split_dim = d;
            }
        }
        let mid = ids.len() / 2;
        {
            let coords = &self.coords;
            let dim = self.dim;
            ids.select_nth_unstable_by(mid, |&a, &b| {
                let va = coords[a as usize * dim + split_dim];
                let vb = coords[b as usize * dim + split_dim];
                va.total_cmp(&vb).then(a.cmp(&b))
            });
        }
        let point = ids[mid];
        let split = self.coord(point, split_dim);
        let slot = self.nodes.len();
        self.nodes.push(Node { point, split_dim: split_dim as u8, split, left: NONE, right: NONE });
        let (lo, rest) = ids.split_at_mut(mid);
        let left = self.build_rec(lo);
        let right = self.build_rec(&mut rest[1..]);
        self.nodes[slot].left = left;
        self.nodes[slot].right = right;
        slot as u32
    }

    /// Nearest point to `q` as `(id, squared distance)`.
    pub fn nearest(&self, q: &[f64]) -> (usize, f64) {
        debug_assert_eq!(q.len(), self.dim);
        let mut best = (u32::MAX, f64::INFINITY);
        self.search(self.root, q, &mut best);
        (best.0 as usize, best.1)
    }

    fn search(&self, node: u32, q: &[f64], best: &mut (u32, f64)) {
        if node == NONE {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &self.coords[n.point as usize * self.dim..(n.point as usize + 1) * self.dim];
        let d = sq_dist(q, p);
        if d < best.1 || (d == best.1 && n.point < best.0) {
            *best = (n.point, d);
        }
        let diff = q[n.split_dim as usize] - n.split;
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.search(near, q, best);
        // non-strict so equal-distance points with lower ids are still found
        if diff * diff <= best.1 {
            self.search(far, q, best);
        }
    }
}
