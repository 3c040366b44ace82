//! Waypoint extraction along a lattice path using a combined arc-length and
//! discrete-curvature knot parameterisation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gridplan::GridPath;
use crate::types::{unwrap_angle, Vec3, WaypointSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointSelectionConfig {
    /// Path length per waypoint (m).
    pub k_d_min: f64,
    /// Accumulated curvature measure per waypoint.
    pub k_c_min: f64,
    pub min_waypoints: usize,
    pub max_waypoints: usize,
}

impl Default for WaypointSelectionConfig {
    fn default() -> Self {
        Self {
            k_d_min: 2.0,
            k_c_min: 1.5,
            min_waypoints: 2,
            max_waypoints: 14,
        }
    }
}

impl WaypointSelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_d_min > 0.0 && self.k_c_min > 0.0) {
            return Err(domain("k_d_min and k_c_min must be positive"));
        }
        if !(2 <= self.min_waypoints && self.min_waypoints <= self.max_waypoints) {
            return Err(domain("waypoint bounds must satisfy 2 <= min <= max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotParameterization {
    /// Cumulative arc length.
    pub k_d: Vec<f64>,
    /// Cumulative curvature weighted by local arc length.
    pub k_c: Vec<f64>,
    /// `(k_d + k_c) / 2`
    pub k: Vec<f64>,
}

/// Inverse radius of the circle through three points; zero when collinear.
pub fn inverse_circumradius(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = (b - a).norm();
    let bc = (c - b).norm();
    let ca = (a - c).norm();
    let twice_area = (b - a).cross(&(c - a)).norm();
    let denom = ab * bc * ca;
    if denom <= 0.0 || twice_area <= 1e-12 * denom.max(1e-300).cbrt().powi(2) {
        return 0.0;
    }
    2.0 * twice_area / denom
}

pub fn knot_parameterization(points: &[Vec3]) -> Result<KnotParameterization> {
    if points.len() < 2 {
        return Err(Error::DegeneratePath("path needs at least two points".into()));
    }
    let m = points.len();
    let mut k_d = vec![0.0; m];
    for i in 1..m {
        let d = (points[i] - points[i - 1]).norm();
        if d < 1e-12 {
            return Err(Error::DegeneratePath(format!("duplicate consecutive points at index {i}")));
        }
        k_d[i] = k_d[i - 1] + d;
    }
    let mut k_c = vec![0.0; m];
    for i in 1..m {
        // Curvature is only defined at interior points.
        let term = if i + 1 < m {
            inverse_circumradius(&points[i - 1], &points[i], &points[i + 1]) * (k_d[i + 1] - k_d[i - 1]) / 2.0
        } else {
            0.0
        };
        k_c[i] = k_c[i - 1] + term;
    }
    let k = k_d.iter().zip(&k_c).map(|(d, c)| 0.5 * (d + c)).collect();
    Ok(KnotParameterization { k_d, k_c, k })
}

/// Number of waypoints, start and goal included, before clamping is applied
/// by [`waypoint_count`].
pub fn raw_waypoint_count(knots: &KnotParameterization, config: &WaypointSelectionConfig) -> f64 {
    let d = *knots.k_d.last().unwrap() / config.k_d_min;
    let c = *knots.k_c.last().unwrap() / config.k_c_min;
    d.max(c)
}

pub fn waypoint_count(knots: &KnotParameterization, config: &WaypointSelectionConfig) -> usize {
    let raw = raw_waypoint_count(knots, config).ceil();
    (raw.max(0.0) as usize).clamp(config.min_waypoints, config.max_waypoints)
}

/// Heading of the final path segment, unwrapped next to `reference`.
fn goal_heading(points: &[Vec3], reference: f64) -> f64 {
    for w in points.windows(2).rev() {
        let d = w[1] - w[0];
        if d.x.hypot(d.y) > 1e-9 {
            return unwrap_angle(d.y.atan2(d.x), reference);
        }
    }
    reference
}

/// Pick waypoints at path points nearest to uniformly spaced knot levels.
pub fn select_waypoints(
    path: &GridPath,
    config: &WaypointSelectionConfig,
    start: Vec3,
    start_yaw: f64,
    goal: Vec3,
) -> Result<WaypointSequence> {
    config.validate()?;
    let pts = &path.points;
    if pts.len() < 2 {
        let yaw = goal_heading(&[start, goal], start_yaw);
        return WaypointSequence::direct(start, start_yaw, goal, yaw);
    }
    let knots = knot_parameterization(pts)?;
    let n = waypoint_count(&knots, config);
    let total = *knots.k.last().unwrap();
    let last = pts.len() - 1;

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for i in 1..n - 1 {
        let level = total * i as f64 / (n - 1) as f64;
        let idx = nearest_index(&knots.k, level);
        if idx == 0 || idx >= last {
            continue;
        }
        if chosen.last().is_some_and(|&p| p >= idx) {
            continue;
        }
        chosen.push(idx);
    }
    let intermediate: Vec<Vec3> = chosen.iter().map(|&i| pts[i]).collect();
    let goal_yaw = goal_heading(&[&pts[..last], &[goal]].concat(), start_yaw);
    WaypointSequence::new(pts[0], start_yaw, intermediate, goal, goal_yaw)
}

fn nearest_index(k: &[f64], level: f64) -> usize {
    let pos = k.partition_point(|v| *v < level);
    if pos == 0 {
        return 0;
    }
    if pos >= k.len() {
        return k.len() - 1;
    }
    if (k[pos] - level).abs() < (level - k[pos - 1]).abs() {
        pos
    } else {
        pos - 1
    }
}
