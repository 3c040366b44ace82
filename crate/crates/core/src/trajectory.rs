//! Piecewise polynomial position + yaw trajectories.
//!
//! Each segment stores its coefficients in segment-local time `τ ∈ [0, duration]`,
//! lowest order first.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::types::{BoundaryState, Vec3};

/// `k`-th derivative of `Σ c_j τ^j` at `tau`.
pub fn poly_derivative(coeffs: &[f64], tau: f64, k: usize) -> f64 {
    let n = coeffs.len();
    if k >= n {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in (k..n).rev() {
        acc = acc * tau + coeffs[j] * falling_factorial(j, k);
    }
    acc
}

/// `j! / (j - k)!`
pub fn falling_factorial(j: usize, k: usize) -> f64 {
    ((j + 1 - k)..=j).fold(1.0, |acc, v| acc * v as f64)
}

/// Exact `∫_0^h (d^k p / dτ^k)^2 dτ` for a monomial-basis polynomial.
pub fn poly_derivative_sq_integral(coeffs: &[f64], h: f64, k: usize) -> f64 {
    let n = coeffs.len();
    let mut total = 0.0;
    for i in k..n {
        let fi = falling_factorial(i, k) * coeffs[i];
        if fi == 0.0 {
            continue;
        }
        for j in k..n {
            let fj = falling_factorial(j, k) * coeffs[j];
            let e = (i + j + 1 - 2 * k) as i32;
            total += fi * fj * h.powi(e) / e as f64;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub coeffs_x: Vec<f64>,
    pub coeffs_y: Vec<f64>,
    pub coeffs_z: Vec<f64>,
    pub coeffs_yaw: Vec<f64>,
}

impl Segment {
    pub fn position(&self, tau: f64, order: usize) -> Vec3 {
        Vec3::new(
            poly_derivative(&self.coeffs_x, tau, order),
            poly_derivative(&self.coeffs_y, tau, order),
            poly_derivative(&self.coeffs_z, tau, order),
        )
    }

    pub fn yaw(&self, tau: f64, order: usize) -> f64 {
        poly_derivative(&self.coeffs_yaw, tau, order)
    }

    fn axes(&self) -> [&Vec<f64>; 3] {
        [&self.coeffs_x, &self.coeffs_y, &self.coeffs_z]
    }
}

/// Position and yaw derivative of a given order at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub position: Vec3,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomialTrajectory {
    pub segments: Vec<Segment>,
}

/// Relative slack on the time domain before `evaluate` reports out-of-range.
const TIME_SLACK: f64 = 1e-9;

impl PiecewisePolynomialTrajectory {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let traj = Self { segments };
        traj.validate()?;
        Ok(traj)
    }

    /// Trajectory holding `position` and `yaw` for `duration` seconds.
    pub fn hover(position: Vec3, yaw: f64, duration: f64) -> Result<Self> {
        Self::new(vec![Segment {
            duration,
            coeffs_x: vec![position.x],
            coeffs_y: vec![position.y],
            coeffs_z: vec![position.z],
            coeffs_yaw: vec![yaw],
        }])
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(domain("trajectory has no segments"));
        }
        for s in &self.segments {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(domain(format!("segment duration {} is not positive", s.duration)));
            }
            if s.axes().iter().any(|c| c.is_empty()) || s.coeffs_yaw.is_empty() {
                return Err(domain("segment with empty coefficient vector"));
            }
            let finite = s.axes().iter().all(|c| c.iter().all(|v| v.is_finite()))
                && s.coeffs_yaw.iter().all(|v| v.is_finite());
            if !finite {
                return Err(domain("non-finite trajectory coefficient"));
            }
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.duration).collect()
    }

    /// Segment index and local time for `t`, which must already lie in `[0, T]`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let mut start = 0.0;
        let last = self.segments.len() - 1;
        for (i, s) in self.segments.iter().enumerate() {
            if i == last || t < start + s.duration {
                return (i, (t - start).clamp(0.0, s.duration));
            }
            start += s.duration;
        }
        unreachable!()
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let total = self.total_time();
        let slack = TIME_SLACK * total.max(1.0);
        if !t.is_finite() || t < -slack || t > total + slack {
            return Err(Error::OutOfRange { t, total });
        }
        Ok(t.clamp(0.0, total))
    }

    /// Order-th time derivative of position and yaw at global time `t`.
    pub fn evaluate(&self, t: f64, order: usize) -> Result<TrajectoryPoint> {
        if order > 4 {
            return Err(domain(format!("derivative order {order} exceeds 4")));
        }
        let t = self.check_time(t)?;
        let (i, tau) = self.locate(t);
        let s = &self.segments[i];
        Ok(TrajectoryPoint {
            position: s.position(tau, order),
            yaw: s.yaw(tau, order),
        })
    }

    /// Like `evaluate` but clamps `t` to `[0, T]`; for derivatives past the end
    /// the vehicle is considered to hold its final pose.
    pub fn evaluate_clamped(&self, t: f64, order: usize) -> TrajectoryPoint {
        let total = self.total_time();
        if t > total && order > 0 {
            return TrajectoryPoint {
                position: Vec3::zeros(),
                yaw: 0.0,
            };
        }
        let (i, tau) = self.locate(t.clamp(0.0, total));
        let s = &self.segments[i];
        TrajectoryPoint {
            position: s.position(tau, order),
            yaw: s.yaw(tau, order),
        }
    }

    pub fn position_at(&self, t: f64) -> Vec3 {
        self.evaluate_clamped(t, 0).position
    }

    pub fn yaw_at(&self, t: f64) -> f64 {
        self.evaluate_clamped(t, 0).yaw
    }

    /// Live derivative state at time `t` (zero once the trajectory has ended).
    pub fn boundary_at(&self, t: f64) -> BoundaryState {
        let d = |k| self.evaluate_clamped(t, k);
        BoundaryState {
            velocity: d(1).position,
            acceleration: d(2).position,
            jerk: d(3).position,
            snap: d(4).position,
            yaw_rate: d(1).yaw,
            yaw_accel: d(2).yaw,
        }
    }

    pub fn end_position(&self) -> Vec3 {
        let s = self.segments.last().unwrap();
        s.position(s.duration, 0)
    }

    /// Cumulative start time of every segment joint, excluding `0` and `T`.
    pub fn joint_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::new();
        for s in &self.segments[..self.segments.len() - 1] {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Largest jump across interior joints of derivatives `0..=max_pos_order`
    /// (position) and `0..=max_yaw_order` (yaw).
    pub fn max_joint_discontinuity(&self, max_pos_order: usize, max_yaw_order: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.segments.windows(2) {
            for k in 0..=max_pos_order {
                let jump = (w[0].position(w[0].duration, k) - w[1].position(0.0, k)).norm();
                worst = worst.max(jump);
            }
            for k in 0..=max_yaw_order {
                worst = worst.max((w[0].yaw(w[0].duration, k) - w[1].yaw(0.0, k)).abs());
            }
        }
        worst
    }

    /// `n` uniformly spaced samples `(t, position, yaw)` over `[0, T]`.
    pub fn sample_uniform(&self, n: usize) -> Vec<(f64, Vec3, f64)> {
        let total = self.total_time();
        (0..n)
            .map(|i| {
                let t = if n <= 1 { 0.0 } else { total * i as f64 / (n - 1) as f64 };
                let p = self.evaluate_clamped(t, 0);
                (t, p.position, p.yaw)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let traj: Self = serde_json::from_str(s)?;
        traj.validate()?;
        Ok(traj)
    }
}
