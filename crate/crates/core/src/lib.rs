//! Sampling-based online trajectory planning for drone interception.
//!
//! The planner predicts where a target will be, searches a multi-resolution
//! occupancy grid towards every predicted position, fits minimum-snap
//! trajectories through knots picked along each path, stretches every
//! candidate's traversal time to match the target's predicted arrival and
//! keeps the fastest reachable candidate.

pub mod clock;
pub mod error;
pub mod feasibility;
pub mod gridplan;
pub mod minsnap;
pub mod planner;
pub mod policy;
pub mod predict;
pub mod sim;
pub mod trajectory;
pub mod types;
pub mod waypoints;

#[cfg(feature = "native")]
pub mod cli;

pub use error::{Error, Result};
pub use trajectory::{PiecewisePolynomialTrajectory, Segment, TrajectoryPoint};
pub use types::{Aabb, BoundaryState, DynamicLimits, SnapCostWeights, TimeAllocation, Vec3, WaypointSequence};
