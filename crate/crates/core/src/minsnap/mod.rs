//! Minimum-snap trajectory generation: the inner QP, the snap cost, the
//! outer time-allocation search and the time-scaling transforms.

mod cost;
mod optimize;
pub mod qp;
mod scaling;

pub use cost::snap_cost;
pub use optimize::{heuristic_allocation, optimize_time_allocation, optimize_time_allocation_with, TimeOptimizerOptions};
pub use qp::{solve_qp, solve_qp_detailed, solve_qp_with_end, QpProblem, QpSolution};
pub use scaling::{scale_boundary, scale_trajectory};
