//! Sampled dynamic-limit checks on polynomial trajectories.

use crate::trajectory::{falling_factorial, PiecewisePolynomialTrajectory};
use crate::types::DynamicLimits;

pub const SAMPLES_PER_SEGMENT: usize = 100;

/// Peak sampled magnitudes over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeakMagnitudes {
    pub speed: f64,
    pub accel: f64,
    pub yaw_rate: f64,
}

impl PeakMagnitudes {
    /// Largest ratio of peak to limit; `≤ 1` means within limits.
    pub fn worst_ratio(&self, limits: &DynamicLimits) -> f64 {
        (self.speed / limits.max_speed)
            .max(self.accel / limits.max_accel)
            .max(self.yaw_rate / limits.max_yaw_rate)
    }
}

/// Coefficients of the `k`-th derivative, padded to a fixed width.
fn derivative_coeffs(c: &[f64], k: usize) -> [f64; MAX_COEFFS] {
    let mut out = [0.0; MAX_COEFFS];
    for j in k..c.len().min(MAX_COEFFS) {
        out[j - k] = c[j] * falling_factorial(j, k);
    }
    out
}

#[inline]
fn horner(c: &[f64; MAX_COEFFS], len: usize, tau: f64) -> f64 {
    c[..len].iter().rev().fold(0.0, |acc, v| acc * tau + v)
}

const MAX_COEFFS: usize = 10;

pub fn peak_magnitudes(traj: &PiecewisePolynomialTrajectory) -> PeakMagnitudes {
    let mut v2max: f64 = 0.0;
    let mut a2max: f64 = 0.0;
    let mut yaw: f64 = 0.0;
    let n = SAMPLES_PER_SEGMENT;
    for s in &traj.segments {
        let len = s.coeffs_x.len().min(MAX_COEFFS);
        let mut vel = [[0.0; MAX_COEFFS]; 3];
        let mut acc = vel;
        for (i, c) in [&s.coeffs_x, &s.coeffs_y, &s.coeffs_z].iter().enumerate() {
            vel[i] = derivative_coeffs(c, 1);
            acc[i] = derivative_coeffs(c, 2);
        }
        let ylen = s.coeffs_yaw.len().min(MAX_COEFFS);
        let yrate = derivative_coeffs(&s.coeffs_yaw, 1);
        let step = s.duration / (n - 1) as f64;
        for j in 0..n {
            let tau = step * j as f64;
            let mut v2 = 0.0;
            let mut a2 = 0.0;
            for i in 0..3 {
                v2 += horner(&vel[i], len.saturating_sub(1), tau).powi(2);
                a2 += horner(&acc[i], len.saturating_sub(2), tau).powi(2);
            }
            v2max = v2max.max(v2);
            a2max = a2max.max(a2);
            yaw = yaw.max(horner(&yrate, ylen.saturating_sub(1), tau).abs());
        }
    }
    PeakMagnitudes {
        speed: v2max.sqrt(),
        accel: a2max.sqrt(),
        yaw_rate: yaw,
    }
}

/// True iff sampled speed, acceleration and yaw rate stay within `limits`.
pub fn check_feasibility(traj: &PiecewisePolynomialTrajectory, limits: &DynamicLimits) -> bool {
    peak_magnitudes(traj).worst_ratio(limits) <= 1.0
}
