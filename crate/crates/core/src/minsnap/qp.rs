//! Inner QP: polynomial coefficients for a fixed time allocation.
//!
//! Every channel (x, y, z, yaw) is solved independently. The unknowns are the
//! derivatives `0..r` held at each segment joint; a degree `2r - 1` segment is
//! fully determined by its two endpoint derivative vectors, so joint continuity
//! through order `r - 1` holds by construction. Pinned entries (start state,
//! waypoint positions, goal) are eliminated and the remaining free derivatives
//! minimise the squared-derivative cost through one banded SPD solve.

use std::sync::LazyLock;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::trajectory::{falling_factorial, PiecewisePolynomialTrajectory, Segment};
use crate::types::{BoundaryState, SnapCostWeights, TimeAllocation, WaypointSequence};

/// Joint derivatives carried per position channel (C⁴ continuity, degree 9).
pub const POSITION_ORDER: usize = 5;
/// Joint derivatives carried for yaw (C² continuity, degree 5).
pub const YAW_ORDER: usize = 3;

const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem {
    pub waypoints: WaypointSequence,
    pub boundary: BoundaryState,
    pub time_allocation: TimeAllocation,
    pub weights: SnapCostWeights,
}

/// Constant unit-duration matrices for one continuity order `r`.
struct ChannelBasis {
    r: usize,
    /// Maps normalised coefficients to normalised endpoint derivatives.
    coeffs_to_endpoint: DMatrix<f64>,
    /// Maps normalised endpoint derivatives to normalised coefficients.
    endpoint_to_coeffs: DMatrix<f64>,
    /// Cost quadratic form over normalised endpoint derivatives.
    cost: DMatrix<f64>,
}

impl ChannelBasis {
    fn new(r: usize) -> Self {
        let n = 2 * r;
        let q = r - 1;
        let int = |v: f64| BigRational::from_integer((v as i64).into());
        let mut a = vec![vec![BigRational::zero(); n]; n];
        for k in 0..r {
            a[k][k] = int(falling_factorial(k, k));
            for j in k..n {
                a[r + k][j] = int(falling_factorial(j, k));
            }
        }
        // The entries are rational, so the inverse and the cost form are built
        // exactly and rounded once; a floating-point product of the inverse
        // loses several digits to cancellation.
        let a_inv = rational_inverse(&a);
        let mut qm = vec![vec![BigRational::zero(); n]; n];
        for i in q..n {
            for j in q..n {
                let e = (i + j + 1 - 2 * q) as i64;
                qm[i][j] = int(falling_factorial(i, q) * falling_factorial(j, q)) / BigRational::from_integer(e.into());
            }
        }
        let mut cost = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = BigRational::zero();
                for k in 0..n {
                    for l in 0..n {
                        acc += &a_inv[k][i] * &qm[k][l] * &a_inv[l][j];
                    }
                }
                cost[(i, j)] = acc.to_f64().expect("finite cost entry");
            }
        }
        let to_f64 = |m: &[Vec<BigRational>]| DMatrix::from_fn(n, n, |i, j| m[i][j].to_f64().expect("finite entry"));
        Self {
            r,
            coeffs_to_endpoint: to_f64(&a),
            endpoint_to_coeffs: to_f64(&a_inv),
            cost,
        }
    }

    /// Cost exponent `1 - 2q` for the segment-duration scaling.
    fn duration_exponent(&self) -> i32 {
        1 - 2 * (self.r as i32 - 1)
    }
}

/// Gauss-Jordan inverse over the rationals.
fn rational_inverse(a: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&i| !m[i][col].is_zero()).expect("endpoint interpolation matrix is invertible");
        m.swap(col, pivot);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v /= &p;
        }
        for i in 0..n {
            if i != col && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in 0..2 * n {
                    let d = &f * &m[col][j];
                    m[i][j] -= d;
                }
            }
        }
    }
    m.into_iter().map(|row| row[n..].to_vec()).collect()
}

static POSITION_BASIS: LazyLock<ChannelBasis> = LazyLock::new(|| ChannelBasis::new(POSITION_ORDER));
static YAW_BASIS: LazyLock<ChannelBasis> = LazyLock::new(|| ChannelBasis::new(YAW_ORDER));

/// Joint-derivative layout of one channel: which entries are pinned and to what.
struct ChannelLayout<'a> {
    basis: &'a ChannelBasis,
    knots: usize,
    /// `Some(v)` when the entry is pinned; one column per right-hand side.
    pinned: Vec<Option<Vec<f64>>>,
}

/// Result of one channel solve: joint derivatives per right-hand side.
struct ChannelSolution {
    /// `values[rhs][knot * r + k]`
    values: Vec<Vec<f64>>,
    cost: Vec<f64>,
}

impl ChannelLayout<'_> {
    fn index(&self, knot: usize, k: usize) -> usize {
        knot * self.basis.r + k
    }

    fn solve(&self, durations: &[f64]) -> Result<ChannelSolution> {
        let r = self.basis.r;
        let n_full = self.knots * r;
        let n_rhs = self.pinned.iter().flatten().map(|v| v.len()).next().unwrap_or(1);
        let exponent = self.basis.duration_exponent();

        // Full joint-derivative Hessian (banded, block size r).
        let mut h_full = vec![0.0; n_full * n_full];
        for (seg, &h) in durations.iter().enumerate() {
            let base = seg * r;
            for a in 0..2 * r {
                for b in 0..2 * r {
                    let e = exponent + (a % r) as i32 + (b % r) as i32;
                    h_full[(base + a) * n_full + base + b] += self.basis.cost[(a, b)] * h.powi(e);
                }
            }
        }

        let free: Vec<usize> = (0..n_full).filter(|&i| self.pinned[i].is_none()).collect();
        let nf = free.len();

        let mut values = vec![vec![0.0; n_full]; n_rhs];
        for (i, p) in self.pinned.iter().enumerate() {
            if let Some(v) = p {
                for (rhs, val) in v.iter().enumerate() {
                    values[rhs][i] = *val;
                }
            }
        }

        if nf > 0 {
            let mut hff = vec![0.0; nf * nf];
            for (a, &ia) in free.iter().enumerate() {
                for (b, &ib) in free.iter().enumerate() {
                    hff[a * nf + b] = h_full[ia * n_full + ib];
                }
            }
            // Jacobi scaling keeps the factorisation well conditioned across durations.
            let scale: Vec<f64> = (0..nf)
                .map(|i| {
                    let d = hff[i * nf + i];
                    if d > 0.0 {
                        1.0 / d.sqrt()
                    } else {
                        1.0
                    }
                })
                .collect();
            for a in 0..nf {
                for b in 0..nf {
                    hff[a * nf + b] *= scale[a] * scale[b];
                }
            }
            let bandwidth = banded_width(&hff, nf);
            let scaled = hff.clone();
            let chol = BandCholesky::factor(hff, nf, bandwidth)?;

            for vals in values.iter_mut() {
                let mut rhs = vec![0.0; nf];
                for (a, &ia) in free.iter().enumerate() {
                    let mut s = 0.0;
                    for (ib, p) in self.pinned.iter().enumerate() {
                        if p.is_some() {
                            s += h_full[ia * n_full + ib] * vals[ib];
                        }
                    }
                    rhs[a] = -s * scale[a];
                }
                let mut y = chol.solve(&rhs);
                // Iterative refinement.
                for _ in 0..3 {
                    let res: Vec<f64> = (0..nf)
                        .map(|i| {
                            let lo = i.saturating_sub(bandwidth);
                            let hi = (i + bandwidth + 1).min(nf);
                            rhs[i] - (lo..hi).map(|j| scaled[i * nf + j] * y[j]).sum::<f64>()
                        })
                        .collect();
                    for (yi, di) in y.iter_mut().zip(chol.solve(&res)) {
                        *yi += di;
                    }
                }
                for (a, &ia) in free.iter().enumerate() {
                    vals[ia] = y[a] * scale[a];
                }
            }
        }

        let cost = values
            .iter()
            .map(|v| {
                let mut c = 0.0;
                for i in 0..n_full {
                    let lo = i.saturating_sub(2 * r);
                    let hi = (i + 2 * r).min(n_full);
                    let mut row = 0.0;
                    for j in lo..hi {
                        row += h_full[i * n_full + j] * v[j];
                    }
                    c += v[i] * row;
                }
                c.max(0.0)
            })
            .collect();
        Ok(ChannelSolution { values, cost })
    }

    /// Monomial coefficients (segment-local time) for segment `seg`.
    fn coefficients(&self, values: &[f64], seg: usize, h: f64) -> Vec<f64> {
        let r = self.basis.r;
        let n = 2 * r;
        let mut d = vec![0.0; n];
        for k in 0..r {
            let hk = h.powi(k as i32);
            d[k] = values[self.index(seg, k)] * hk;
            d[r + k] = values[self.index(seg + 1, k)] * hk;
        }
        let m = &self.basis.endpoint_to_coeffs;
        let a = &self.basis.coeffs_to_endpoint;
        let apply = |mat: &DMatrix<f64>, v: &[f64]| -> Vec<f64> {
            (0..n).map(|i| (0..n).map(|j| mat[(i, j)] * v[j]).sum()).collect()
        };
        // Iterative refinement: the product loses digits to cancellation.
        let mut u = apply(m, &d);
        for _ in 0..2 {
            let back = apply(a, &u);
            let res: Vec<f64> = d.iter().zip(&back).map(|(x, y)| x - y).collect();
            for (ui, ci) in u.iter_mut().zip(apply(m, &res)) {
                *ui += ci;
            }
        }
        u.iter().enumerate().map(|(i, v)| v / h.powi(i as i32)).collect()
    }
}

fn banded_width(m: &[f64], n: usize) -> usize {
    let mut bw = 0;
    for i in 0..n {
        for j in 0..i {
            if m[i * n + j] != 0.0 {
                bw = bw.max(i - j);
                break;
            }
        }
    }
    bw
}

/// Lower-triangular Cholesky factor restricted to a band.
struct BandCholesky {
    l: Vec<f64>,
    n: usize,
    bw: usize,
}

impl BandCholesky {
    fn factor(mut a: Vec<f64>, n: usize, bw: usize) -> Result<Self> {
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = a[i * n + j];
                for k in k0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                if i == j {
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::Numerical {
                            message: format!("QP reduced Hessian not positive definite at pivot {i}"),
                            condition: f64::INFINITY,
                        });
                    }
                    a[i * n + i] = s.sqrt();
                } else {
                    a[i * n + j] = s / a[j * n + j];
                }
            }
        }
        let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = (max / min).powi(2);
        if condition > MAX_CONDITION {
            return Err(Error::Numerical {
                message: "QP reduced Hessian is ill-conditioned".into(),
                condition,
            });
        }
        Ok(Self { l: a, n, bw })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, l) = (self.n, self.bw, &self.l);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }
}

/// Solved trajectory together with the raw (unweighted) channel integrals.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub trajectory: PiecewisePolynomialTrajectory,
    /// `∫‖snap‖² dt` summed over x, y, z.
    pub snap_integral: f64,
    /// `∫(yaw accel)² dt`.
    pub yaw_accel_integral: f64,
}

impl QpSolution {
    pub fn smoothness_cost(&self, weights: &SnapCostWeights) -> f64 {
        weights.mu_r * self.snap_integral + weights.mu_psi * self.yaw_accel_integral
    }
}

/// Minimum-snap trajectory through `waypoints` for the given durations.
pub fn solve_qp(problem: &QpProblem) -> Result<PiecewisePolynomialTrajectory> {
    problem.weights.validate()?;
    Ok(solve_qp_detailed(&problem.waypoints, &problem.boundary, problem.time_allocation.durations())?.trajectory)
}

/// QP solve that also reports the snap and yaw-acceleration integrals.
///
/// Weights only scale each decoupled channel's objective, so the minimiser is
/// independent of them and they are applied by the caller.
pub fn solve_qp_detailed(waypoints: &WaypointSequence, boundary: &BoundaryState, durations: &[f64]) -> Result<QpSolution> {
    solve_qp_with_end(waypoints, boundary, durations, None)
}

/// Like [`solve_qp_detailed`], optionally also pinning the goal derivatives
/// to `end` instead of leaving them free.
pub fn solve_qp_with_end(
    waypoints: &WaypointSequence,
    boundary: &BoundaryState,
    durations: &[f64],
    end: Option<&BoundaryState>,
) -> Result<QpSolution> {
    let m = waypoints.segment_count();
    if durations.len() != m {
        return Err(domain(format!(
            "time allocation has {} segments but waypoints define {m}",
            durations.len()
        )));
    }
    if durations.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(domain("segment durations must be strictly positive"));
    }
    if !boundary.is_finite() || end.is_some_and(|e| !e.is_finite()) {
        return Err(domain("boundary state must be finite"));
    }
    waypoints.validate()?;

    let knots = m + 1;
    let points = waypoints.points();

    let pos_basis = &*POSITION_BASIS;
    let r = pos_basis.r;
    let mut pinned = vec![None; knots * r];
    let start_vals = |k: usize| -> Vec<f64> {
        if k == 0 {
            points[0].iter().copied().collect()
        } else {
            boundary.position_derivative(k).iter().copied().collect()
        }
    };
    for k in 0..r {
        pinned[k] = Some(start_vals(k));
    }
    for (knot, p) in points.iter().enumerate().skip(1) {
        pinned[knot * r] = Some(p.iter().copied().collect());
    }
    if let Some(e) = end {
        for k in 1..r {
            pinned[m * r + k] = Some(e.position_derivative(k).iter().copied().collect());
        }
    }
    let pos_layout = ChannelLayout {
        basis: pos_basis,
        knots,
        pinned,
    };
    let pos = pos_layout.solve(durations)?;

    let yaw_basis = &*YAW_BASIS;
    let ry = yaw_basis.r;
    let mut pinned = vec![None; knots * ry];
    pinned[0] = Some(vec![waypoints.start_yaw]);
    pinned[1] = Some(vec![boundary.yaw_rate]);
    pinned[2] = Some(vec![boundary.yaw_accel]);
    for i in 0..waypoints.intermediate.len() {
        if let Some(y) = waypoints.intermediate_yaw_at(i) {
            pinned[(i + 1) * ry] = Some(vec![y]);
        }
    }
    pinned[m * ry] = Some(vec![waypoints.goal_yaw]);
    if let Some(e) = end {
        pinned[m * ry + 1] = Some(vec![e.yaw_rate]);
        pinned[m * ry + 2] = Some(vec![e.yaw_accel]);
    }
    let yaw_layout = ChannelLayout {
        basis: yaw_basis,
        knots,
        pinned,
    };
    let yaw = yaw_layout.solve(durations)?;

    let segments = durations
        .iter()
        .enumerate()
        .map(|(seg, &h)| Segment {
            duration: h,
            coeffs_x: pos_layout.coefficients(&pos.values[0], seg, h),
            coeffs_y: pos_layout.coefficients(&pos.values[1], seg, h),
            coeffs_z: pos_layout.coefficients(&pos.values[2], seg, h),
            coeffs_yaw: yaw_layout.coefficients(&yaw.values[0], seg, h),
        })
        .collect();

    Ok(QpSolution {
        trajectory: PiecewisePolynomialTrajectory { segments },
        snap_integral: pos.cost.iter().sum(),
        yaw_accel_integral: yaw.cost[0],
    })
}
