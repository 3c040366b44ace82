//! Procedural desk-scale rooms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{make_target_trajectory, PolicyChoice, PredictorChoice, Scenario, TargetSpec};
use crate::error::{domain, Result};
use crate::gridplan::{GridSpec, OccupancyGrid};
use crate::planner::PlannerConfig;
use crate::types::{Aabb, SnapCostWeights, Vec3, WaypointSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeskEnvironment {
    /// 10 × 10 × 2 m, no obstacles.
    EmptyRoom,
    /// 10 × 10 × 2 m with a 2 × 2 array of floor-to-ceiling pillars.
    PillaredRoom,
    /// 30 × 15 × 3 m split by two walls into three bays joined by doorways.
    Corridor,
    /// 10 × 10 × 2 m with low boxes scattered on the floor.
    ScatteredBoxes,
}

fn pillar(cx: f64, cy: f64, half: f64, height: f64) -> Aabb {
    Aabb::new(Vec3::new(cx - half, cy - half, 0.0), Vec3::new(cx + half, cy + half, height))
}

impl DeskEnvironment {
    pub const ALL: [DeskEnvironment; 4] = [
        DeskEnvironment::EmptyRoom,
        DeskEnvironment::PillaredRoom,
        DeskEnvironment::Corridor,
        DeskEnvironment::ScatteredBoxes,
    ];

    pub fn grid_spec(&self) -> GridSpec {
        let small = Aabb::new(Vec3::zeros(), Vec3::new(10.0, 10.0, 2.0));
        let (bounds, resolution, obstacles) = match self {
            DeskEnvironment::EmptyRoom => (small, 0.1, vec![]),
            DeskEnvironment::PillaredRoom => (
                small,
                0.1,
                [(3.3, 3.3), (6.7, 3.3), (3.3, 6.7), (6.7, 6.7)]
                    .iter()
                    .map(|&(x, y)| pillar(x, y, 0.3, 2.0))
                    .collect(),
            ),
            DeskEnvironment::Corridor => (
                Aabb::new(Vec3::zeros(), Vec3::new(30.0, 15.0, 3.0)),
                0.2,
                vec![
                    // wall at x = 10 with a doorway near y = 11
                    Aabb::new(Vec3::new(9.8, 0.0, 0.0), Vec3::new(10.2, 9.5, 3.0)),
                    Aabb::new(Vec3::new(9.8, 12.5, 0.0), Vec3::new(10.2, 15.0, 3.0)),
                    // wall at x = 20 with a doorway near y = 4
                    Aabb::new(Vec3::new(19.8, 0.0, 0.0), Vec3::new(20.2, 2.5, 3.0)),
                    Aabb::new(Vec3::new(19.8, 5.5, 0.0), Vec3::new(20.2, 15.0, 3.0)),
                ],
            ),
            DeskEnvironment::ScatteredBoxes => (
                small,
                0.1,
                [(2.0, 7.5, 0.4), (4.5, 2.0, 0.3), (5.0, 5.5, 0.5), (7.5, 7.0, 0.35), (8.0, 3.0, 0.4), (2.5, 4.0, 0.3)]
                    .iter()
                    .map(|&(x, y, h)| pillar(x, y, h, 0.6 + h))
                    .collect(),
            ),
        };
        GridSpec {
            bounds,
            resolution,
            padding: 0.5,
            obstacles,
        }
    }

    /// Random-target scenario with the interceptor near one corner.
    pub fn scenario(&self, target_speed: f64, departure_delay: f64) -> Scenario {
        let grid = self.grid_spec();
        let z = 1.0_f64.min(0.5 * grid.bounds.max.z);
        Scenario {
            defense_start: Vec3::new(1.0, 1.0, z),
            defense_yaw: 0.0,
            target: TargetSpec::Random {
                waypoints: 3,
                max_speed: target_speed,
                min_leg: 2.0,
            },
            grid,
            departure_delay,
            replan_period: 0.1,
            predictor: PredictorChoice::GroundTruth,
            policy: PolicyChoice::Optimizer,
            success_radius: 0.4,
            planner: PlannerConfig::default(),
            weights: SnapCostWeights::default(),
            step: 0.01,
            overrun: 2.0,
        }
    }
}

/// `n` free waypoints, consecutive ones at least `min_leg` apart and the
/// first at least 2 m from `avoid`, such that the target's path between them
/// stays in free space.
pub fn random_target_waypoints(
    grid: &OccupancyGrid,
    n: usize,
    min_leg: f64,
    avoid: Vec3,
    seed: u64,
) -> Result<WaypointSequence> {
    if n < 2 {
        return Err(domain("target needs at least two waypoints"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..500 {
        let wps = draw_waypoints(grid, n, min_leg, avoid, &mut rng)?;
        // Path shape does not depend on the speed.
        let traj = make_target_trajectory(&wps, 1.0)?;
        if traj.sample_uniform(400).iter().all(|s| grid.is_free(&s.1)) {
            return Ok(wps);
        }
    }
    Err(domain("could not find a collision-free target path"))
}

fn draw_waypoints(
    grid: &OccupancyGrid,
    n: usize,
    min_leg: f64,
    avoid: Vec3,
    rng: &mut ChaCha8Rng,
) -> Result<WaypointSequence> {
    let b = grid.bounds();
    let margin = 0.6;
    let (z_lo, z_hi) = (b.min.z + 0.6, (b.max.z - 0.6).max(b.min.z + 0.7));
    let mut pts: Vec<Vec3> = Vec::with_capacity(n);
    let mut tries = 0;
    while pts.len() < n {
        tries += 1;
        if tries > 10_000 {
            return Err(domain("could not place free target waypoints"));
        }
        let p = Vec3::new(
            rng.random_range(b.min.x + margin..b.max.x - margin),
            rng.random_range(b.min.y + margin..b.max.y - margin),
            rng.random_range(z_lo..z_hi),
        );
        if !grid.is_free(&p) {
            continue;
        }
        let ok = match pts.last() {
            Some(q) => (p - q).norm() >= min_leg,
            None => (p - avoid).norm() >= 2.0,
        };
        if ok {
            pts.push(p);
        }
    }
    WaypointSequence::new(pts[0], 0.0, pts[1..n - 1].to_vec(), pts[n - 1], 0.0)
}
