//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use intercept_core::gridplan::OccupancyGrid;
use intercept_core::predict::GaussianMixture;
use intercept_core::{Aabb, BoundaryState, Vec3, WaypointSequence};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn falling(j: usize, k: usize) -> f64 {
    if j < k {
        0.0
    } else {
        (j - k + 1..=j).map(|v| v as f64).product()
    }
}

/// Row vector of the `k`-th derivative of the monomials `τ^0 … τ^n` at `tau`.
fn deriv_row(n_coeffs: usize, tau: f64, k: usize) -> Vec<f64> {
    (0..n_coeffs)
        .map(|j| if j < k { 0.0 } else { falling(j, k) * tau.powi((j - k) as i32) })
        .collect()
}

/// One scalar channel of a piecewise polynomial QP, written out in the full
/// monomial basis: minimise `Σ ∫ (d^c p/dτ^c)² dτ` subject to pinned values.
pub struct DenseChannel {
    pub n_coeffs: usize,
    pub cost_order: usize,
    /// Derivatives `0..continuity` match across joints.
    pub continuity: usize,
    pub durations: Vec<f64>,
    /// Start derivatives `0..continuity`.
    pub start: Vec<f64>,
    /// Value pinned at each interior joint, if any.
    pub interior: Vec<Option<f64>>,
    pub goal: f64,
}

pub struct DenseSystem {
    pub hessian: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl DenseChannel {
    pub fn system(&self) -> DenseSystem {
        let m = self.durations.len();
        let nc = self.n_coeffs;
        let nv = m * nc;
        let mut h = DMatrix::zeros(nv, nv);
        for (s, &d) in self.durations.iter().enumerate() {
            for i in self.cost_order..nc {
                for j in self.cost_order..nc {
                    let p = (i + j - 2 * self.cost_order) as i32;
                    let v = falling(i, self.cost_order) * falling(j, self.cost_order) * d.powi(p + 1) / (p + 1) as f64;
                    h[(s * nc + i, s * nc + j)] = v;
                }
            }
        }
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        let place = |seg: usize, row: Vec<f64>| {
            let mut full = vec![0.0; nv];
            full[seg * nc..(seg + 1) * nc].copy_from_slice(&row);
            full
        };
        for k in 0..self.continuity {
            rows.push((place(0, deriv_row(nc, 0.0, k)), self.start[k]));
        }
        for s in 0..m - 1 {
            let d = self.durations[s];
            if let Some(v) = self.interior[s] {
                rows.push((place(s, deriv_row(nc, d, 0)), v));
            }
            for k in 0..self.continuity {
                let mut row = place(s, deriv_row(nc, d, k));
                let right = place(s + 1, deriv_row(nc, 0.0, k));
                for (a, b) in row.iter_mut().zip(&right) {
                    *a -= b;
                }
                rows.push((row, 0.0));
            }
        }
        rows.push((place(m - 1, deriv_row(nc, self.durations[m - 1], 0)), self.goal));
        let a = DMatrix::from_fn(rows.len(), nv, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        DenseSystem { hessian: h, a, b }
    }

    /// Coefficients from the full KKT system, segment after segment.
    pub fn solve(&self) -> Vec<Vec<f64>> {
        let sys = self.system();
        let (nv, nr) = (sys.hessian.nrows(), sys.a.nrows());
        let mut kkt = DMatrix::zeros(nv + nr, nv + nr);
        kkt.view_mut((0, 0), (nv, nv)).copy_from(&(&sys.hessian * 2.0));
        kkt.view_mut((0, nv), (nv, nr)).copy_from(&sys.a.transpose());
        kkt.view_mut((nv, 0), (nr, nv)).copy_from(&sys.a);
        let mut rhs = DVector::zeros(nv + nr);
        rhs.rows_mut(nv, nr).copy_from(&sys.b);
        let lu = kkt.clone().lu();
        let mut sol = lu.solve(&rhs).expect("KKT system is singular");
        // Iterative refinement against the monomial-basis KKT matrix.
        for _ in 0..3 {
            let res = &rhs - &kkt * &sol;
            sol += lu.solve(&res).expect("KKT system is singular");
        }
        (0..self.durations.len())
            .map(|s| sol.rows(s * self.n_coeffs, self.n_coeffs).iter().copied().collect())
            .collect()
    }

    /// Norm of the cost gradient projected onto the constraint null space,
    /// together with the constraint residual.
    pub fn kkt_residuals(&self, coeffs: &[Vec<f64>]) -> (f64, f64) {
        let sys = self.system();
        let c = DVector::from_iterator(sys.hessian.nrows(), coeffs.iter().flat_map(|s| s.iter().copied()));
        let g = &sys.hessian * &c * 2.0;
        let aat = &sys.a * sys.a.transpose();
        let lambda = aat.lu().solve(&(&sys.a * &g)).expect("constraints are dependent");
        let projected = &g - sys.a.transpose() * lambda;
        ((projected.norm()) / (1.0 + g.norm()), (&sys.a * &c - &sys.b).norm())
    }
}

/// Dense channels for the x, y, z and yaw parts of a minimum-snap problem.
pub fn dense_channels(wps: &WaypointSequence, boundary: &BoundaryState, durations: &[f64]) -> Vec<DenseChannel> {
    let pts = wps.points();
    let mut out = Vec::new();
    for axis in 0..3 {
        let mut start = vec![pts[0][axis]];
        for k in 1..5 {
            start.push(boundary.position_derivative(k)[axis]);
        }
        out.push(DenseChannel {
            n_coeffs: 10,
            cost_order: 4,
            continuity: 5,
            durations: durations.to_vec(),
            start,
            interior: wps.intermediate.iter().map(|p| Some(p[axis])).collect(),
            goal: wps.goal[axis],
        });
    }
    out.push(DenseChannel {
        n_coeffs: 6,
        cost_order: 2,
        continuity: 3,
        durations: durations.to_vec(),
        start: vec![wps.start_yaw, boundary.yaw_rate, boundary.yaw_accel],
        interior: (0..wps.intermediate.len()).map(|i| wps.intermediate_yaw_at(i)).collect(),
        goal: wps.goal_yaw,
    });
    out
}

/// 64-point Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `∫_0^h f(t) dt` by Gauss-Legendre quadrature.
pub fn integrate(f: impl Fn(f64) -> f64, h: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(0.5 * h * (x + 1.0)))
        .sum::<f64>()
        * 0.5
        * h
}

#[derive(Clone, Copy, PartialEq)]
struct Node(f64, usize);
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Shortest centre-to-centre distance over free base voxels with
/// 26-connectivity, or `None` when the goal voxel cannot be reached.
pub fn dijkstra(grid: &OccupancyGrid, start: &Vec3, goal: &Vec3) -> Option<f64> {
    let [nx, ny, nz] = grid.dims();
    let idx = |v: [usize; 3]| v[0] + nx * (v[1] + ny * v[2]);
    let s = grid.voxel_of(start)?;
    let g = grid.voxel_of(goal)?;
    if grid.is_voxel_occupied(s) || grid.is_voxel_occupied(g) {
        return None;
    }
    let mut dist = vec![f64::INFINITY; nx * ny * nz];
    let mut heap = BinaryHeap::new();
    dist[idx(s)] = 0.0;
    heap.push(Node(0.0, idx(s)));
    let res = grid.resolution();
    while let Some(Node(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        if i == idx(g) {
            return Some(d);
        }
        let v = [i % nx, (i / nx) % ny, i / (nx * ny)];
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let w = [v[0] as i64 + dx, v[1] as i64 + dy, v[2] as i64 + dz];
                    if w.iter().zip([nx, ny, nz]).any(|(c, n)| *c < 0 || *c >= n as i64) {
                        continue;
                    }
                    let w = [w[0] as usize, w[1] as usize, w[2] as usize];
                    if grid.is_voxel_occupied(w) {
                        continue;
                    }
                    let nd = d + res * ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    let j = idx(w);
                    if nd < dist[j] {
                        dist[j] = nd;
                        heap.push(Node(nd, j));
                    }
                }
            }
        }
    }
    None
}

/// Gaussian density through an explicit inverse and determinant.
pub fn gaussian_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = x - mean;
    let inv = cov.clone().try_inverse().expect("covariance is singular");
    let q = (d.transpose() * inv * &d)[(0, 0)];
    let det = cov.determinant();
    (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powi(x.len() as i32) * det).sqrt()
}

pub fn mixture_density(m: &GaussianMixture, x: &DVector<f64>) -> f64 {
    (0..m.n_components())
        .map(|k| m.weights[k] * gaussian_density(x, &m.means[k], &m.covariances[k]))
        .sum()
}

fn select(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

fn select2(m: &DMatrix<f64>, r: &[usize], c: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), c.len(), |i, j| m[(r[i], c[j])])
}

/// Posterior component weights `∝ π_k N(obs | μ_o, Σ_oo)` evaluated term by term.
pub fn brute_force_posterior_weights(m: &GaussianMixture, observed_idx: &[usize], obs: &DVector<f64>) -> Vec<f64> {
    let w: Vec<f64> = (0..m.n_components())
        .map(|k| {
            m.weights[k]
                * gaussian_density(
                    obs,
                    &select(&m.means[k], observed_idx),
                    &select2(&m.covariances[k], observed_idx, observed_idx),
                )
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// `p(future, obs) / p(obs)` straight from the joint mixture.
pub fn brute_force_conditional_density(
    m: &GaussianMixture,
    observed_idx: &[usize],
    obs: &DVector<f64>,
    future: &DVector<f64>,
) -> f64 {
    let dim = m.dim();
    let future_idx: Vec<usize> = (0..dim).filter(|i| !observed_idx.contains(i)).collect();
    let mut joint = DVector::zeros(dim);
    for (j, &i) in observed_idx.iter().enumerate() {
        joint[i] = obs[j];
    }
    for (j, &i) in future_idx.iter().enumerate() {
        joint[i] = future[j];
    }
    let marginal: f64 = (0..m.n_components())
        .map(|k| {
            m.weights[k]
                * gaussian_density(
                    obs,
                    &select(&m.means[k], observed_idx),
                    &select2(&m.covariances[k], observed_idx, observed_idx),
                )
        })
        .sum();
    mixture_density(m, &joint) / marginal
}

/// Random SPD matrix with eigenvalues in roughly `[lo, lo + spread]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, spread: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut s = &a * a.transpose() * (spread / n as f64);
    for i in 0..n {
        s[(i, i)] += lo;
    }
    s
}

/// Random mixture over `dim` dimensions.
pub fn random_mixture(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> GaussianMixture {
    let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    GaussianMixture {
        weights,
        means: (0..k).map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0))).collect(),
        covariances: (0..k).map(|_| random_spd(rng, dim, 0.2, 1.5)).collect(),
    }
}

/// Random waypoint chain with legs of 1–3 m and gentle turns.
pub fn random_waypoints(rng: &mut ChaCha8Rng, segments: usize) -> WaypointSequence {
    let mut pts = vec![Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0)];
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    for _ in 0..segments {
        heading += rng.random_range(-1.2..1.2);
        let l = rng.random_range(1.0..3.0);
        let last = *pts.last().unwrap();
        pts.push(last + Vec3::new(l * heading.cos(), l * heading.sin(), rng.random_range(-0.4..0.4)));
    }
    let n = pts.len();
    WaypointSequence::new(pts[0], rng.random_range(-1.0..1.0), pts[1..n - 1].to_vec(), pts[n - 1], rng.random_range(-1.0..1.0))
        .unwrap()
}

pub fn random_boundary(rng: &mut ChaCha8Rng, scale: f64) -> BoundaryState {
    let mut v = || Vec3::from_fn(|_, _| rng.random_range(-scale..scale));
    BoundaryState {
        velocity: v(),
        acceleration: v(),
        jerk: v(),
        snap: v(),
        yaw_rate: 0.3 * scale,
        yaw_accel: -0.2 * scale,
    }
}

/// Waypoints plus a boundary state taken from the middle of an optimised
/// trajectory, the way a replanning vehicle sees them.
pub fn adaptation_case(rng: &mut ChaCha8Rng) -> (WaypointSequence, BoundaryState) {
    use intercept_core::minsnap::{optimize_time_allocation, solve_qp_detailed};
    use intercept_core::{DynamicLimits, SnapCostWeights};
    let n = rng.random_range(2..=8);
    let mut pts = vec![Vec3::new(5.0, 5.0, 1.0)];
    let mut dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    for _ in 0..n {
        dir += rng.random_range(-1.2..1.2);
        let l = rng.random_range(1.0..3.0);
        let last = *pts.last().unwrap();
        pts.push(last + Vec3::new(l * dir.cos(), l * dir.sin(), rng.random_range(-0.3..0.3)));
    }
    let wps = WaypointSequence::new(pts[0], 0.0, pts[1..n].to_vec(), pts[n], rng.random_range(-1.0..1.0)).unwrap();
    let mut offset = |z: f64| Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), z);
    let (back, ahead) = (offset(0.0), offset(0.2));
    let prior = WaypointSequence::new(pts[0] - back, 0.0, vec![], pts[0] + ahead, 1.0).unwrap();
    let x = optimize_time_allocation(&prior, &BoundaryState::ZERO, &SnapCostWeights::default(), &DynamicLimits::default())
        .unwrap();
    let traj = solve_qp_detailed(&prior, &BoundaryState::ZERO, x.durations()).unwrap().trajectory;
    let b = traj.boundary_at(rng.random_range(0.1..0.9) * traj.total_time());
    (wps, b)
}

/// Euclidean distance from `p` to an axis-aligned box.
pub fn box_distance(b: &Aabb, p: &Vec3) -> f64 {
    let d = Vec3::from_fn(|i, _| (b.min[i] - p[i]).max(p[i] - b.max[i]).max(0.0));
    d.norm()
}

/// A 4×4×1.5 m room with a few thin boxes and a free start and goal set.
pub fn random_world(r: &mut ChaCha8Rng, n_goals: usize) -> (OccupancyGrid, Vec<Aabb>, Vec3, Vec<Vec3>) {
    loop {
        let obstacles: Vec<Aabb> = (0..r.random_range(1..=3))
            .map(|_| {
                let c = Vec3::new(r.random_range(0.8..3.2), r.random_range(0.8..3.2), 0.75);
                let h = Vec3::new(r.random_range(0.05..0.3), r.random_range(0.05..0.3), r.random_range(0.1..0.75));
                Aabb::new(c - h, c + h)
            })
            .collect();
        let grid = OccupancyGrid::build(&obstacles, Aabb::new(Vec3::zeros(), Vec3::new(4.0, 4.0, 1.5)), 0.1, 0.5).unwrap();
        let mut free_point = || {
            for _ in 0..200 {
                let p = Vec3::new(r.random_range(0.05..3.95), r.random_range(0.05..3.95), r.random_range(0.05..1.45));
                if grid.is_free(&p) && obstacles.iter().all(|b| box_distance(b, &p) >= 0.5) {
                    return Some(p);
                }
            }
            None
        };
        let Some(start) = free_point() else { continue };
        let goals: Option<Vec<Vec3>> = (0..n_goals).map(|_| free_point()).collect();
        let Some(goals) = goals else { continue };
        if goals.iter().all(|g| dijkstra(&grid, &start, g).is_some()) {
            return (grid, obstacles, start, goals);
        }
    }
}
