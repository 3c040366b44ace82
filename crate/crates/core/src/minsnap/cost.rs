use crate::trajectory::{poly_derivative_sq_integral, PiecewisePolynomialTrajectory};
use crate::types::SnapCostWeights;

/// `μ_r ∫‖snap‖² dt + μ_ψ ∫ (yaw accel)² dt`, integrated exactly per segment.
pub fn snap_cost(traj: &PiecewisePolynomialTrajectory, weights: &SnapCostWeights) -> f64 {
    traj.segments
        .iter()
        .map(|s| {
            let h = s.duration;
            let snap: f64 = [&s.coeffs_x, &s.coeffs_y, &s.coeffs_z]
                .iter()
                .map(|c| poly_derivative_sq_integral(c, h, 4))
                .sum();
            weights.mu_r * snap + weights.mu_psi * poly_derivative_sq_integral(&s.coeffs_yaw, h, 2)
        })
        .sum()
}
