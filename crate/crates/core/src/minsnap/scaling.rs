//! Time-scaling transforms. Stretching time by `α` divides the `k`-th
//! derivative by `α^k`; minimum-snap solutions keep their shape when the time
//! allocation and boundary state are transformed together.

use crate::error::{domain, Result};
use crate::trajectory::{PiecewisePolynomialTrajectory, Segment};
use crate::types::BoundaryState;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(domain(format!("scale factor {alpha} must be positive")));
    }
    Ok(())
}

/// `α⁻¹ D`: k-th order position derivatives times `α^-k`, yaw rate times `α^-1`,
/// yaw acceleration times `α^-2`.
pub fn scale_boundary(state: &BoundaryState, alpha: f64) -> Result<BoundaryState> {
    check_alpha(alpha)?;
    let inv = 1.0 / alpha;
    Ok(BoundaryState {
        velocity: state.velocity * inv,
        acceleration: state.acceleration * inv.powi(2),
        jerk: state.jerk * inv.powi(3),
        snap: state.snap * inv.powi(4),
        yaw_rate: state.yaw_rate * inv,
        yaw_accel: state.yaw_accel * inv.powi(2),
    })
}

/// Reparameterise so that `scaled(α t) = original(t)`.
pub fn scale_trajectory(traj: &PiecewisePolynomialTrajectory, alpha: f64) -> Result<PiecewisePolynomialTrajectory> {
    check_alpha(alpha)?;
    let rescale = |c: &Vec<f64>| -> Vec<f64> {
        let mut f = 1.0;
        c.iter()
            .map(|v| {
                let out = v * f;
                f /= alpha;
                out
            })
            .collect()
    };
    let segments = traj
        .segments
        .iter()
        .map(|s| Segment {
            duration: s.duration * alpha,
            coeffs_x: rescale(&s.coeffs_x),
            coeffs_y: rescale(&s.coeffs_y),
            coeffs_z: rescale(&s.coeffs_z),
            coeffs_yaw: rescale(&s.coeffs_yaw),
        })
        .collect();
    Ok(PiecewisePolynomialTrajectory { segments })
}
