//! Collision-free path generation on voxel grids.
//!
//! Paths are rectilinear: each move changes one axis by one voxel, and length
//! is the number of moves. A planner works on a predicted grid, and its path
//! is then checked against the ground-truth grid.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{OccupancyGrid, VoxelIndex};
use crate::seeding::{rng_for, Stream};

pub fn l1(a: VoxelIndex, b: VoxelIndex) -> usize {
    (0..3).map(|i| a[i].abs_diff(b[i])).sum()
}

/// Voxel sequence with unit rectilinear steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPath(Vec<VoxelIndex>);

impl GridPath {
    pub fn new(voxels: Vec<VoxelIndex>) -> Result<Self> {
        if voxels.is_empty() {
            return Err(Error::Precondition("a path needs at least one voxel".into()));
        }
        for w in voxels.windows(2) {
            if l1(w[0], w[1]) != 1 {
                return Err(Error::Precondition(format!("{:?} -> {:?} is not a unit move", w[0], w[1])));
            }
        }
        Ok(GridPath(voxels))
    }

    pub fn voxels(&self) -> &[VoxelIndex] {
        &self.0
    }

    /// Number of moves.
    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> VoxelIndex {
        self.0[0]
    }

    pub fn goal(&self) -> VoxelIndex {
        self.0[self.0.len() - 1]
    }

    pub fn collides(&self, grid: &OccupancyGrid) -> bool {
        self.0.iter().any(|&v| grid.is_occupied(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Episode {
    pub start: VoxelIndex,
    pub goal: VoxelIndex,
}

impl Episode {
    pub fn new(start: VoxelIndex, goal: VoxelIndex, n: usize) -> Result<Self> {
        if start == goal {
            return Err(Error::Precondition(format!("start and goal coincide at {start:?}")));
        }
        if start.iter().chain(goal.iter()).any(|&c| c >= n) {
            return Err(Error::Bounds(format!("{start:?} -> {goal:?} outside a {n}^3 grid")));
        }
        Ok(Episode { start, goal })
    }

    /// Endpoints of `d = (n/2) v / |v|_1` and `-d` about the grid center.
    pub fn from_direction(v: [f64; 3], n: usize) -> Result<Self> {
        let norm: f64 = v.iter().map(|c| c.abs()).sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Precondition(format!("direction {v:?} has no usable L1 norm")));
        }
        let half = n as f64 / 2.0;
        let to_voxel = |sign: f64| -> VoxelIndex {
            std::array::from_fn(|i| {
                let c = (half + sign * half * v[i] / norm).floor();
                c.clamp(0.0, (n - 1) as f64) as usize
            })
        };
        Episode::new(to_voxel(1.0), to_voxel(-1.0), n)
    }

    pub fn length_l1(&self) -> usize {
        l1(self.start, self.goal)
    }
}

/// `count` episodes from uniformly random directions.
pub fn sample_episodes(n: usize, count: usize, seed: u64) -> Vec<Episode> {
    let mut rng = rng_for(seed, Stream::Episodes);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        if let Ok(ep) = Episode::from_direction(v, n) {
            out.push(ep);
        }
    }
    out
}

/// Random endpoints anywhere in the grid, for tests and benchmarks.
pub fn random_episode<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Episode {
    loop {
        let s: VoxelIndex = std::array::from_fn(|_| rng.random_range(0..n));
        let g: VoxelIndex = std::array::from_fn(|_| rng.random_range(0..n));
        if let Ok(ep) = Episode::new(s, g, n) {
            return ep;
        }
    }
}

fn check_endpoints(grid: &OccupancyGrid, ep: &Episode) -> Result<()> {
    let n = grid.n();
    if !grid.contains(ep.start) || !grid.contains(ep.goal) {
        return Err(Error::Bounds(format!("{:?} -> {:?} outside a {n}^3 grid", ep.start, ep.goal)));
    }
    for (name, v) in [("start", ep.start), ("goal", ep.goal)] {
        if grid.is_occupied(v) {
            return Err(Error::Endpoint(format!("{name} {v:?} is occupied")));
        }
    }
    Ok(())
}

fn neighbors(v: VoxelIndex, n: usize) -> impl Iterator<Item = VoxelIndex> {
    (0..3).flat_map(move |axis| {
        let lo = (v[axis] > 0).then(|| {
            let mut w = v;
            w[axis] -= 1;
            w
        });
        let hi = (v[axis] + 1 < n).then(|| {
            let mut w = v;
            w[axis] += 1;
            w
        });
        lo.into_iter().chain(hi)
    })
}

/// Shortest 6-connected path avoiding occupied voxels, or `None` if the
/// goal is unreachable.
pub fn astar(grid: &OccupancyGrid, ep: &Episode) -> Result<Option<GridPath>> {
    check_endpoints(grid, ep)?;
    let n = grid.n();
    let flat = |v: VoxelIndex| (v[0] * n + v[1]) * n + v[2];
    let mut g = vec![usize::MAX; n * n * n];
    let mut parent = vec![usize::MAX; n * n * n];
    let mut heap = BinaryHeap::new();
    g[flat(ep.start)] = 0;
    heap.push(Reverse((l1(ep.start, ep.goal), 0usize, ep.start)));
    while let Some(Reverse((_, cost, v))) = heap.pop() {
        let fv = flat(v);
        if cost > g[fv] {
            continue;
        }
        if v == ep.goal {
            let mut path = vec![v];
            let mut cur = fv;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push([cur / (n * n), (cur / n) % n, cur % n]);
            }
            path.reverse();
            return GridPath::new(path).map(Some);
        }
        for w in neighbors(v, n) {
            if grid.is_occupied(w) {
                continue;
            }
            let fw = flat(w);
            let c = cost + 1;
            if c < g[fw] {
                g[fw] = c;
                parent[fw] = fv;
                heap.push(Reverse((c + l1(w, ep.goal), c, w)));
            }
        }
    }
    Ok(None)
}

/// Obstacle-blind monotone path: all x moves, then y, then z.
pub fn baseline_shortest_l1(ep: &Episode) -> GridPath {
    let mut path = vec![ep.start];
    let mut cur = ep.start;
    for axis in 0..3 {
        while cur[axis] != ep.goal[axis] {
            if cur[axis] < ep.goal[axis] {
                cur[axis] += 1;
            } else {
                cur[axis] -= 1;
            }
            path.push(cur);
        }
    }
    GridPath(path)
}

/// A* with the filled bounding box of `gt` as the obstacle set. Endpoints on
/// the box surface are cleared so they remain plannable.
pub fn baseline_sabb(gt: &OccupancyGrid, ep: &Episode) -> Result<Option<GridPath>> {
    let mut obstacles = gt.filled_bounding_box();
    if let Some((lo, hi)) = gt.bounding_box() {
        for v in [ep.start, ep.goal] {
            let inside = (0..3).all(|i| lo[i] <= v[i] && v[i] <= hi[i]);
            let on_surface = (0..3).any(|i| v[i] == lo[i] || v[i] == hi[i]);
            if inside && on_surface && !gt.is_occupied(v) {
                obstacles.set(v, false);
            }
        }
    }
    astar(&obstacles, ep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planner {
    /// A* on the predicted grid.
    AStar,
    ShortestL1,
    /// A* around the ground-truth bounding box.
    Sabb,
}

impl Planner {
    pub fn name(self) -> &'static str {
        match self {
            Planner::AStar => "astar",
            Planner::ShortestL1 => "shortest_l1",
            Planner::Sabb => "sabb",
        }
    }

    pub fn plan(self, pred: &OccupancyGrid, gt: &OccupancyGrid, ep: &Episode) -> Result<Option<GridPath>> {
        match self {
            Planner::AStar => astar(pred, ep),
            Planner::ShortestL1 => Ok(Some(baseline_shortest_l1(ep))),
            Planner::Sabb => baseline_sabb(gt, ep),
        }
    }
}

impl fmt::Display for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Planner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "astar" => Ok(Planner::AStar),
            "shortest_l1" => Ok(Planner::ShortestL1),
            "sabb" => Ok(Planner::Sabb),
            _ => Err(Error::Format(format!("unknown planner {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub model_id: String,
    pub episodes: usize,
    pub skipped: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean of `L(P*) / L(P)` over successes; NaN when there are none.
    pub optimality: f64,
}

impl PlanReport {
    /// Pools several reports as if their episodes formed one set.
    pub fn combine(model_id: impl Into<String>, parts: &[PlanReport]) -> PlanReport {
        let episodes: usize = parts.iter().map(|r| r.episodes).sum();
        let skipped: usize = parts.iter().map(|r| r.skipped).sum();
        let successes: usize = parts.iter().map(|r| r.successes).sum();
        let ratio_sum: f64 = parts.iter().filter(|r| r.successes > 0).map(|r| r.optimality * r.successes as f64).sum();
        let attempted = episodes - skipped;
        PlanReport {
            model_id: model_id.into(),
            episodes,
            skipped,
            successes,
            success_rate: if attempted == 0 { f64::NAN } else { successes as f64 / attempted as f64 },
            optimality: if successes == 0 { f64::NAN } else { ratio_sum / successes as f64 },
        }
    }
}

enum Outcome {
    Skipped,
    Failed,
    Success(f64),
}

fn run_episode(planner: Planner, pred: &OccupancyGrid, gt: &OccupancyGrid, ep: &Episode) -> Result<Outcome> {
    if pred.is_occupied(ep.start) || pred.is_occupied(ep.goal) || gt.is_occupied(ep.start) || gt.is_occupied(ep.goal) {
        return Ok(Outcome::Skipped);
    }
    let path = match planner.plan(pred, gt, ep) {
        Ok(Some(p)) => p,
        Ok(None) => return Ok(Outcome::Failed),
        Err(Error::Endpoint(_)) => return Ok(Outcome::Skipped),
        Err(e) => return Err(e),
    };
    if path.collides(gt) {
        return Ok(Outcome::Failed);
    }
    let best = astar(gt, ep)?.expect("a collision-free path exists, so A* finds one");
    Ok(Outcome::Success(best.len() as f64 / path.len() as f64))
}

/// A* on `pred`, judged against `gt`.
pub fn evaluate_paths(pred: &OccupancyGrid, gt: &OccupancyGrid, episodes: &[Episode]) -> Result<PlanReport> {
    evaluate_with(Planner::AStar, pred, gt, episodes)
}

pub fn evaluate_with(
    planner: Planner,
    pred: &OccupancyGrid,
    gt: &OccupancyGrid,
    episodes: &[Episode],
) -> Result<PlanReport> {
    if pred.n() != gt.n() {
        return Err(Error::shape(format!("grid sides differ: {} vs {}", pred.n(), gt.n())));
    }
    for ep in episodes {
        if !gt.contains(ep.start) || !gt.contains(ep.goal) {
            return Err(Error::Bounds(format!("episode {ep:?} outside a {}^3 grid", gt.n())));
        }
    }
    let outcomes: Vec<Outcome> =
        episodes.par_iter().map(|ep| run_episode(planner, pred, gt, ep)).collect::<Result<_>>()?;
    let skipped = outcomes.iter().filter(|o| matches!(o, Outcome::Skipped)).count();
    let ratios: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| match o {
            Outcome::Success(r) => Some(*r),
            _ => None,
        })
        .collect();
    let attempted = episodes.len() - skipped;
    Ok(PlanReport {
        model_id: planner.name().to_string(),
        episodes: episodes.len(),
        skipped,
        successes: ratios.len(),
        success_rate: if attempted == 0 { f64::NAN } else { ratios.len() as f64 / attempted as f64 },
        optimality: if ratios.is_empty() { f64::NAN } else { ratios.iter().sum::<f64>() / ratios.len() as f64 },
    })
}

/// CSV with header `model_id,episodes,skipped,success_rate,optimality`.
pub fn report_csv(reports: &[PlanReport]) -> String {
    let mut s = String::from("model_id,episodes,skipped,success_rate,optimality\n");
    for r in reports {
        s.push_str(&format!("{},{},{},{:.6},{:.6}\n", r.model_id, r.episodes, r.skipped, r.success_rate, r.optimality));
    }
    s
}
