use std::collections::VecDeque;

use hofnet::funcnets::MlpSpec;
use hofnet::geometry::{OccupancyGrid, VoxelIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Breadth-first search; with unit edge weights this is Dijkstra.
pub fn dijkstra(grid: &OccupancyGrid, s: VoxelIndex, g: VoxelIndex) -> Option<usize> {
    let n = grid.n();
    let idx = |v: VoxelIndex| (v[0] * n + v[1]) * n + v[2];
    let mut dist = vec![usize::MAX; n * n * n];
    let mut q = VecDeque::new();
    dist[idx(s)] = 0;
    q.push_back(s);
    while let Some(v) = q.pop_front() {
        if v == g {
            return Some(dist[idx(v)]);
        }
        for axis in 0..3 {
            for delta in [-1i64, 1] {
                let c = v[axis] as i64 + delta;
                if c < 0 || c >= n as i64 {
                    continue;
                }
                let mut w = v;
                w[axis] = c as usize;
                if !grid.is_occupied(w) && dist[idx(w)] == usize::MAX {
                    dist[idx(w)] = dist[idx(v)] + 1;
                    q.push_back(w);
                }
            }
        }
    }
    None
}

pub fn random_grid(rng: &mut ChaCha8Rng, n: usize, p: f64) -> OccupancyGrid {
    let mut g = OccupancyGrid::empty(n);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if rng.random_bool(p) {
                    g.set([x, y, z], true);
                }
            }
        }
    }
    g
}

/// Plain nested loops over the documented parameter layout.
pub fn naive_forward(spec: &MlpSpec, theta: &[f64], x: &[f64]) -> Vec<f64> {
    let sizes = spec.layer_sizes();
    let mut h = x.to_vec();
    let mut off = 0;
    for l in 0..sizes.len() - 1 {
        let (fi, fo) = (sizes[l], sizes[l + 1]);
        let w = &theta[off..off + fi * fo];
        let b = &theta[off + fi * fo..off + fi * fo + fo];
        off += fi * fo + fo;
        let mut out = vec![0.0; fo];
        for o in 0..fo {
            let mut s = b[o];
            for i in 0..fi {
                s += w[o * fi + i] * h[i];
            }
            out[o] = if l + 2 < sizes.len() { spec.activation().apply(s) } else { s };
        }
        h = out;
    }
    h
}

/// Mean squared distance to the nearest point of `y`, by exhaustive search.
pub fn naive_chamfer_asym(x: &[[f64; 3]], y: &[[f64; 3]]) -> f64 {
    let total: f64 = x
        .iter()
        .map(|p| y.iter().map(|q| (0..3).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>()).fold(f64::INFINITY, f64::min))
        .sum();
    total / x.len() as f64
}
