//! Voxel occupancy grid with obstacle padding and a multi-goal,
//! multi-resolution A* search.
//!
//! Coarse lattices (×2, ×5, ×10 the base resolution) are aggregated
//! conservatively: a coarse cell is blocked when any base voxel it covers is
//! blocked or when it extends past the grid bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::types::{Aabb, Vec3};

/// Lattice sizes relative to the base resolution.
pub const LEVEL_FACTORS: [usize; 4] = [1, 2, 5, 10];
/// Inter-drone distance thresholds (fraction of room diagonal) for each coarser level.
pub const LEVEL_THRESHOLDS: [f64; 3] = [0.10, 0.20, 0.40];
/// Default lattice size in metres.
pub const DEFAULT_LATTICE: f64 = 0.1;

/// Lattice level index for a given distance from the start.
pub fn level_for_distance(distance: f64, room_diagonal: f64) -> usize {
    LEVEL_THRESHOLDS
        .iter()
        .take_while(|&&f| distance > f * room_diagonal)
        .count()
}

/// Lattice size (m) used at `distance` from the defense vehicle.
pub fn resolution_for_distance(distance: f64, room_diagonal: f64) -> f64 {
    DEFAULT_LATTICE * LEVEL_FACTORS[level_for_distance(distance, room_diagonal)] as f64
}

/// Serialized grid description; occupancy is derived on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bounds: Aabb,
    pub resolution: f64,
    pub padding: f64,
    #[serde(default)]
    pub obstacles: Vec<Aabb>,
}

#[derive(Debug, Clone)]
struct Level {
    resolution: f64,
    dims: [usize; 3],
    blocked: Vec<bool>,
}

impl Level {
    fn linear(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    fn len(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    spec: GridSpec,
    levels: Vec<Level>,
}

impl OccupancyGrid {
    pub fn build(obstacles: &[Aabb], bounds: Aabb, base_resolution: f64, padding: f64) -> Result<Self> {
        Self::from_spec(GridSpec {
            bounds,
            resolution: base_resolution,
            padding,
            obstacles: obstacles.to_vec(),
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        if !(spec.resolution.is_finite() && spec.resolution > 0.0) {
            return Err(domain(format!("grid resolution {} must be positive", spec.resolution)));
        }
        if !(spec.padding.is_finite() && spec.padding >= 0.0) {
            return Err(domain("padding must be non-negative"));
        }
        let ext = spec.bounds.extent();
        if ext.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(domain("grid bounds must have positive extent"));
        }
        let res = spec.resolution;
        let dims = [0, 1, 2].map(|i| ((ext[i] / res) - 1e-9).ceil().max(1.0) as usize);
        let total: usize = dims.iter().product();
        if total > 50_000_000 {
            return Err(domain("grid too large"));
        }
        let mut base = Level {
            resolution: res,
            dims,
            blocked: vec![false; total],
        };
        let origin = spec.bounds.min;
        for ob in &spec.obstacles {
            let inf = ob.inflated(spec.padding);
            // Voxel centres `origin + (i + 0.5) res` inside the inflated box.
            let range = |axis: usize| -> Option<(usize, usize)> {
                let lo = ((inf.min[axis] - origin[axis]) / res - 0.5 - 1e-9).ceil().max(0.0);
                let hi = ((inf.max[axis] - origin[axis]) / res - 0.5 + 1e-9).floor();
                if hi < 0.0 || lo > hi {
                    return None;
                }
                let hi = (hi as usize).min(dims[axis] - 1);
                let lo = lo as usize;
                (lo <= hi).then_some((lo, hi))
            };
            let (Some(rx), Some(ry), Some(rz)) = (range(0), range(1), range(2)) else {
                continue;
            };
            for z in rz.0..=rz.1 {
                for y in ry.0..=ry.1 {
                    for x in rx.0..=rx.1 {
                        let i = base.linear([x, y, z]);
                        base.blocked[i] = true;
                    }
                }
            }
        }
        let mut levels = vec![base];
        for &f in &LEVEL_FACTORS[1..] {
            let b = &levels[0];
            let cd = dims.map(|n| n.div_ceil(f));
            let mut lvl = Level {
                resolution: res * f as f64,
                dims: cd,
                blocked: vec![false; cd.iter().product()],
            };
            for cz in 0..cd[2] {
                for cy in 0..cd[1] {
                    for cx in 0..cd[0] {
                        let c = [cx, cy, cz];
                        let overhang = (0..3).any(|a| (c[a] + 1) * f > dims[a]);
                        let blocked = overhang || {
                            let mut any = false;
                            'scan: for z in cz * f..(cz + 1) * f {
                                for y in cy * f..(cy + 1) * f {
                                    for x in cx * f..(cx + 1) * f {
                                        if b.blocked[b.linear([x, y, z])] {
                                            any = true;
                                            break 'scan;
                                        }
                                    }
                                }
                            }
                            any
                        };
                        let i = lvl.linear(c);
                        lvl.blocked[i] = blocked;
                    }
                }
            }
            levels.push(lvl);
        }
        Ok(Self { spec, levels })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn bounds(&self) -> &Aabb {
        &self.spec.bounds
    }

    pub fn resolution(&self) -> f64 {
        self.spec.resolution
    }

    pub fn padding(&self) -> f64 {
        self.spec.padding
    }

    pub fn dims(&self) -> [usize; 3] {
        self.levels[0].dims
    }

    pub fn diagonal(&self) -> f64 {
        self.spec.bounds.diagonal()
    }

    fn cell_at(&self, level: usize, p: &Vec3) -> Option<[usize; 3]> {
        let lvl = &self.levels[level];
        let b = &self.spec.bounds;
        if !b.contains(p) {
            return None;
        }
        let mut c = [0usize; 3];
        for a in 0..3 {
            let v = ((p[a] - b.min[a]) / lvl.resolution).floor();
            c[a] = (v.max(0.0) as usize).min(lvl.dims[a] - 1);
        }
        Some(c)
    }

    fn center(&self, level: usize, c: [usize; 3]) -> Vec3 {
        let r = self.levels[level].resolution;
        let o = self.spec.bounds.min;
        Vec3::new(
            o.x + (c[0] as f64 + 0.5) * r,
            o.y + (c[1] as f64 + 0.5) * r,
            o.z + (c[2] as f64 + 0.5) * r,
        )
    }

    /// Base voxel index of `p`, if inside the bounds.
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        self.cell_at(0, p)
    }

    pub fn voxel_center(&self, v: [usize; 3]) -> Vec3 {
        self.center(0, v)
    }

    pub fn is_voxel_occupied(&self, v: [usize; 3]) -> bool {
        let b = &self.levels[0];
        b.blocked[b.linear(v)]
    }

    /// Inside the bounds and in an unoccupied base voxel.
    pub fn is_free(&self, p: &Vec3) -> bool {
        self.voxel_of(p).is_some_and(|v| !self.is_voxel_occupied(v))
    }

    pub fn occupied_count(&self) -> usize {
        self.levels[0].blocked.iter().filter(|b| **b).count()
    }

    /// Whether the coarse cell at `level` containing `p` is blocked.
    pub fn is_blocked_at_level(&self, level: usize, p: &Vec3) -> bool {
        match self.cell_at(level, p) {
            Some(c) => {
                let l = &self.levels[level];
                l.blocked[l.linear(c)]
            }
            None => true,
        }
    }

    pub fn level_resolution(&self, level: usize) -> f64 {
        self.levels[level].resolution
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(s)?)
    }
}

/// Lattice path `q̃¹ … q̃^M`; endpoints are the exact start and goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub points: Vec<Vec3>,
    /// Sum of centre-to-centre edge lengths on the lattice.
    pub lattice_cost: f64,
}

impl GridPath {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolutionSchedule {
    /// Base resolution everywhere.
    Fixed,
    /// Coarsen with distance from the start relative to the room diagonal.
    DistanceBased { room_diagonal: f64 },
}

/// Per-goal search outcome, indexed like the input goals; `None` marks an
/// unreachable goal.
pub type MultiGoalPaths = Vec<Option<GridPath>>;

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for OpenEntry {
    // Reversed for a min-heap: lower f, then lower h, then lower node id.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(o.h.total_cmp(&self.h))
            .then(o.node.cmp(&self.node))
    }
}

const NO_PARENT: u32 = u32::MAX;

fn directions() -> impl Iterator<Item = [i32; 3]> {
    (-1..=1).flat_map(move |dz| (-1..=1).flat_map(move |dy| (-1..=1).map(move |dx| [dx, dy, dz])))
        .filter(|d| *d != [0, 0, 0])
}

/// One A* search from `start` that continues until every goal is reached.
///
/// The heuristic is the distance to the centroid of the goals not yet reached;
/// the open set is re-keyed whenever a goal is reached. A node expanded at
/// distance `d` from the start generates its 26 neighbours on the lattice
/// chosen by `schedule` for `d`, stepping down to finer lattices where the
/// coarse neighbour is blocked.
pub fn multi_resolution_astar(
    grid: &OccupancyGrid,
    start: Vec3,
    goals: &[Vec3],
    schedule: ResolutionSchedule,
) -> Result<MultiGoalPaths> {
    if goals.is_empty() {
        return Err(domain("multi-goal search needs at least one goal"));
    }
    let start_cell = grid
        .cell_at(0, &start)
        .ok_or_else(|| domain("search start lies outside the grid bounds"))?;

    let offsets: Vec<usize> = grid
        .levels
        .iter()
        .scan(0usize, |acc, l| {
            let o = *acc;
            *acc += l.len();
            Some(o)
        })
        .collect();
    let total: usize = grid.levels.iter().map(|l| l.len()).sum();
    let decode = |node: usize| -> (usize, [usize; 3]) {
        let level = offsets.iter().rposition(|&o| o <= node).unwrap();
        (level, grid.levels[level].coords(node - offsets[level]))
    };
    let encode = |level: usize, c: [usize; 3]| offsets[level] + grid.levels[level].linear(c);

    let mut result: MultiGoalPaths = vec![None; goals.len()];
    let mut pending: Vec<usize> = (0..goals.len()).filter(|&i| grid.is_free(&goals[i])).collect();
    if pending.is_empty() {
        return Ok(result);
    }

    let start_node = encode(0, start_cell);
    let mut g = vec![f64::INFINITY; total];
    let mut parent = vec![NO_PARENT; total];
    let mut closed = vec![false; total];
    let centroid = |pending: &[usize]| -> Vec3 {
        pending.iter().fold(Vec3::zeros(), |acc, &i| acc + goals[i]) / pending.len() as f64
    };
    let mut target = centroid(&pending);
    let mut open = BinaryHeap::new();
    g[start_node] = 0.0;
    let h0 = (grid.center(0, start_cell) - target).norm();
    open.push(OpenEntry {
        f: h0,
        h: h0,
        node: start_node,
    });

    while let Some(entry) = open.pop() {
        let node = entry.node;
        if closed[node] {
            continue;
        }
        closed[node] = true;
        let (level, cell) = decode(node);
        let center = grid.center(level, cell);

        // Goals whose cell at this lattice is the expanded node.
        let reached: Vec<usize> = pending
            .iter()
            .copied()
            .filter(|&gi| grid.cell_at(level, &goals[gi]) == Some(cell))
            .collect();
        if !reached.is_empty() {
            let chain = backtrack(&parent, node);
            for &gi in &reached {
                result[gi] = Some(build_path(grid, &chain, &decode, start, goals[gi], g[node]));
            }
            pending.retain(|gi| !reached.contains(gi));
            if pending.is_empty() {
                break;
            }
            target = centroid(&pending);
            let rekeyed: Vec<OpenEntry> = open
                .drain()
                .filter(|e| !closed[e.node])
                .map(|e| {
                    let (l, c) = decode(e.node);
                    let h = (grid.center(l, c) - target).norm();
                    OpenEntry {
                        f: g[e.node] + h,
                        h,
                        node: e.node,
                    }
                })
                .collect();
            open = rekeyed.into();
        }

        let expand_level = match schedule {
            ResolutionSchedule::Fixed => 0,
            ResolutionSchedule::DistanceBased { room_diagonal } => {
                level_for_distance((center - start).norm(), room_diagonal)
            }
        };
        for d in directions() {
            let dv = Vec3::new(d[0] as f64, d[1] as f64, d[2] as f64);
            for lev in (0..=expand_level).rev() {
                let p = center + dv * grid.levels[lev].resolution;
                let Some(c) = grid.cell_at(lev, &p) else { continue };
                let lv = &grid.levels[lev];
                if lv.blocked[lv.linear(c)] {
                    continue;
                }
                let nb = encode(lev, c);
                if nb == node {
                    continue;
                }
                if !closed[nb] {
                    let ng = g[node] + (grid.center(lev, c) - center).norm();
                    if ng < g[nb] {
                        g[nb] = ng;
                        parent[nb] = node as u32;
                        let h = (grid.center(lev, c) - target).norm();
                        open.push(OpenEntry { f: ng + h, h, node: nb });
                    }
                }
                break;
            }
        }
    }
    Ok(result)
}

fn backtrack(parent: &[u32], mut node: usize) -> Vec<usize> {
    let mut chain = vec![node];
    while parent[node] != NO_PARENT {
        node = parent[node] as usize;
        chain.push(node);
    }
    chain.reverse();
    chain
}

fn build_path(
    grid: &OccupancyGrid,
    chain: &[usize],
    decode: &impl Fn(usize) -> (usize, [usize; 3]),
    start: Vec3,
    goal: Vec3,
    cost: f64,
) -> GridPath {
    if chain.len() == 1 {
        return GridPath {
            points: vec![goal],
            lattice_cost: 0.0,
        };
    }
    let mut points: Vec<Vec3> = chain
        .iter()
        .map(|&n| {
            let (l, c) = decode(n);
            grid.center(l, c)
        })
        .collect();
    points[0] = start;
    *points.last_mut().unwrap() = goal;
    GridPath {
        points,
        lattice_cost: cost,
    }
}

/// Whether the straight segment `a`–`b` stays in free base voxels, probed
/// at half the base resolution.
pub fn segment_is_free(grid: &OccupancyGrid, a: &Vec3, b: &Vec3) -> bool {
    let len = (b - a).norm();
    let n = (len / (0.5 * grid.resolution())).ceil().max(1.0) as usize;
    (0..=n).all(|i| grid.is_free(&(a + (b - a) * (i as f64 / n as f64))))
}

/// Greedy line-of-sight shortcutting of a lattice path, resampled at the
/// base resolution. Removes the staircase pattern of lattice moves so that
/// only genuine turns remain; endpoints are kept exactly.
pub fn shortcut_path(grid: &OccupancyGrid, path: &GridPath) -> GridPath {
    let pts = &path.points;
    if pts.len() <= 2 {
        return path.clone();
    }
    let mut corners = vec![pts[0]];
    let mut i = 0;
    while i < pts.len() - 1 {
        let mut j = i + 1;
        while j + 1 < pts.len() && segment_is_free(grid, &pts[i], &pts[j + 1]) {
            j += 1;
        }
        corners.push(pts[j]);
        i = j;
    }
    let step = grid.resolution();
    let mut points = vec![corners[0]];
    for w in corners.windows(2) {
        let n = ((w[1] - w[0]).norm() / step).ceil().max(1.0) as usize;
        for k in 1..n {
            points.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
        points.push(w[1]);
    }
    GridPath {
        points,
        lattice_cost: path.lattice_cost,
    }
}
