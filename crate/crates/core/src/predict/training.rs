//! Training windows cut from random minimum-snap target trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PredictionConfig;
use crate::error::{domain, Result};
use crate::gridplan::OccupancyGrid;
use crate::sim::make_target_trajectory;
use crate::trajectory::PiecewisePolynomialTrajectory;
use crate::types::{Vec3, WaypointSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Waypoints per trajectory, start and goal included.
    pub min_waypoints: usize,
    pub max_waypoints: usize,
    pub min_speed: f64,
    pub max_speed: f64,
    /// Minimum distance between consecutive waypoints (m).
    pub min_leg: f64,
    /// Window start spacing in units of `dt`.
    pub stride: usize,
    /// Draws allowed per waypoint before giving up.
    pub max_retries: usize,
    /// Keep waypoints this far inside the grid bounds (m).
    pub margin: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            min_waypoints: 2,
            max_waypoints: 5,
            min_speed: 0.5,
            max_speed: 2.5,
            min_leg: 1.0,
            stride: 2,
            max_retries: 1000,
            margin: 0.3,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2 <= self.min_waypoints && self.min_waypoints <= self.max_waypoints) {
            return Err(domain("training waypoint counts must satisfy 2 <= min <= max"));
        }
        if !(0.0 < self.min_speed && self.min_speed <= self.max_speed) {
            return Err(domain("training speeds must satisfy 0 < min <= max"));
        }
        if self.stride == 0 || self.max_retries == 0 || !(self.min_leg >= 0.0) || !(self.margin >= 0.0) {
            return Err(domain("invalid training stride, retries, leg length or margin"));
        }
        Ok(())
    }
}

fn random_free_point(
    grid: &OccupancyGrid,
    config: &TrainingConfig,
    previous: Option<&Vec3>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec3> {
    let b = grid.bounds();
    let lo = b.min.add_scalar(config.margin);
    let hi = b.max.add_scalar(-config.margin);
    if (0..3).any(|i| lo[i] >= hi[i]) {
        return Err(domain("grid is too small for the training margin"));
    }
    for _ in 0..config.max_retries {
        let p = Vec3::from_fn(|i, _| rng.random_range(lo[i]..hi[i]));
        if !grid.is_free(&p) {
            continue;
        }
        if previous.is_some_and(|q| (p - q).norm() < config.min_leg) {
            continue;
        }
        return Ok(p);
    }
    Err(domain(format!(
        "no free waypoint found after {} draws",
        config.max_retries
    )))
}

/// A random target trajectory through free waypoints.
pub(crate) fn random_trajectory(
    grid: &OccupancyGrid,
    config: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PiecewisePolynomialTrajectory> {
    let n = rng.random_range(config.min_waypoints..=config.max_waypoints);
    let mut pts: Vec<Vec3> = Vec::with_capacity(n);
    for _ in 0..n {
        let p = random_free_point(grid, config, pts.last(), rng)?;
        pts.push(p);
    }
    let speed = rng.random_range(config.min_speed..=config.max_speed);
    let wps = WaypointSequence::new(pts[0], 0.0, pts[1..n - 1].to_vec(), pts[n - 1], 0.0)?;
    make_target_trajectory(&wps, speed)
}

/// Windows of `n_obs + n_pred` positions spaced `dt` apart, observed block
/// first. Window times follow the runtime observation rule: sample times
/// before the trajectory start clamp to zero and times past the end hold the
/// final position.
pub(crate) fn windows(traj: &PiecewisePolynomialTrajectory, pred: &PredictionConfig, stride: usize) -> Vec<Vec<f64>> {
    let len = pred.n_obs + pred.n_pred;
    let total = traj.total_time();
    let mut out = Vec::new();
    let mut w = 0usize;
    loop {
        let now = (w * stride) as f64 * pred.dt;
        if now > total + 1e-9 {
            break;
        }
        let v: Vec<f64> = (0..len)
            .flat_map(|m| {
                let t = now + (m as f64 - (pred.n_obs - 1) as f64) * pred.dt;
                let p = traj.position_at(t.max(0.0));
                [p.x, p.y, p.z]
            })
            .collect();
        out.push(v);
        w += 1;
    }
    out
}

/// Random trajectories through free space, cut into windows that stay
/// entirely off obstacles.
pub fn generate_training_set(
    grid: &OccupancyGrid,
    n_trajectories: usize,
    prediction: &PredictionConfig,
    config: &TrainingConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    prediction.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..n_trajectories {
        let traj = random_trajectory(grid, config, &mut rng)?;
        for w in windows(&traj, prediction, config.stride) {
            let free = w.chunks_exact(3).all(|p| grid.is_free(&Vec3::new(p[0], p[1], p[2])));
            if free {
                out.push(w);
            }
        }
    }
    Ok(out)
}
