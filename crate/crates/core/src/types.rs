//! Shared domain values: vectors, boundary states, time allocations,
//! waypoint sequences, cost weights and dynamic limits.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Higher-order derivatives of the vehicle state at the start of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryState {
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub snap: Vec3,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
}

impl BoundaryState {
    pub const ZERO: BoundaryState = BoundaryState {
        velocity: Vec3::new(0.0, 0.0, 0.0),
        acceleration: Vec3::new(0.0, 0.0, 0.0),
        jerk: Vec3::new(0.0, 0.0, 0.0),
        snap: Vec3::new(0.0, 0.0, 0.0),
        yaw_rate: 0.0,
        yaw_accel: 0.0,
    };

    /// Position derivative of order `k` in 1..=4.
    pub fn position_derivative(&self, k: usize) -> Vec3 {
        match k {
            1 => self.velocity,
            2 => self.acceleration,
            3 => self.jerk,
            4 => self.snap,
            _ => panic!("position derivative order {k} not stored in a boundary state"),
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn is_finite(&self) -> bool {
        [self.velocity, self.acceleration, self.jerk, self.snap]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
            && self.yaw_rate.is_finite()
            && self.yaw_accel.is_finite()
    }
}

/// Per-segment durations of a piecewise trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeAllocation(Vec<f64>);

impl TimeAllocation {
    pub fn new(durations: Vec<f64>) -> Result<Self> {
        if durations.is_empty() {
            return Err(domain("time allocation needs at least one segment"));
        }
        if let Some(d) = durations.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(domain(format!("segment duration {d} is not strictly positive")));
        }
        Ok(Self(durations))
    }

    pub fn durations(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(domain(format!("scale factor {alpha} must be positive")));
        }
        Ok(Self(self.0.iter().map(|d| d * alpha).collect()))
    }
}

impl TryFrom<Vec<f64>> for TimeAllocation {
    type Error = crate::Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TimeAllocation> for Vec<f64> {
    fn from(t: TimeAllocation) -> Self {
        t.0
    }
}

/// Start, intermediate and goal waypoints that a trajectory must pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointSequence {
    pub start: Vec3,
    pub start_yaw: f64,
    pub intermediate: Vec<Vec3>,
    /// Optional yaw pin per intermediate waypoint; empty means all free.
    #[serde(default)]
    pub intermediate_yaw: Vec<Option<f64>>,
    pub goal: Vec3,
    pub goal_yaw: f64,
}

impl WaypointSequence {
    pub fn new(start: Vec3, start_yaw: f64, intermediate: Vec<Vec3>, goal: Vec3, goal_yaw: f64) -> Result<Self> {
        let seq = Self {
            start,
            start_yaw,
            intermediate,
            intermediate_yaw: Vec::new(),
            goal,
            goal_yaw,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Straight start-to-goal sequence.
    pub fn direct(start: Vec3, start_yaw: f64, goal: Vec3, goal_yaw: f64) -> Result<Self> {
        Self::new(start, start_yaw, Vec::new(), goal, goal_yaw)
    }

    pub fn validate(&self) -> Result<()> {
        let pts = self.points();
        if pts.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(domain("waypoints must be finite"));
        }
        for w in pts.windows(2) {
            if (w[1] - w[0]).norm() < 1e-9 {
                return Err(domain("consecutive waypoints are identical"));
            }
        }
        if !self.intermediate_yaw.is_empty() && self.intermediate_yaw.len() != self.intermediate.len() {
            return Err(domain("intermediate yaw list length mismatch"));
        }
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        self.intermediate.len() + 1
    }

    /// All positions in order: start, intermediates, goal.
    pub fn points(&self) -> Vec<Vec3> {
        let mut v = Vec::with_capacity(self.intermediate.len() + 2);
        v.push(self.start);
        v.extend_from_slice(&self.intermediate);
        v.push(self.goal);
        v
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.points().windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    pub fn intermediate_yaw_at(&self, i: usize) -> Option<f64> {
        self.intermediate_yaw.get(i).copied().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapCostWeights {
    pub mu_r: f64,
    pub mu_psi: f64,
    pub rho: f64,
}

impl Default for SnapCostWeights {
    fn default() -> Self {
        Self {
            mu_r: 1.0,
            mu_psi: 1.0,
            rho: 1000.0,
        }
    }
}

impl SnapCostWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.mu_r, self.mu_psi, self.rho].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(domain("cost weights must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicLimits {
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_yaw_rate: f64,
}

impl Default for DynamicLimits {
    fn default() -> Self {
        Self {
            max_speed: 3.5,
            max_accel: 5.0,
            max_yaw_rate: 4.0,
        }
    }
}

impl DynamicLimits {
    pub fn validate(&self) -> Result<()> {
        if [self.max_speed, self.max_accel, self.max_yaw_rate]
            .iter()
            .any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(domain("dynamic limits must be strictly positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn inflated(&self, pad: f64) -> Self {
        let d = Vec3::repeat(pad);
        Self::new(self.min - d, self.max + d)
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }
}

/// Wrap `angle` onto the branch closest to `reference`.
pub fn unwrap_angle(angle: f64, reference: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    angle + two_pi * ((reference - angle) / two_pi).round()
}
