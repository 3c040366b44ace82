//! Time-allocation policies and traversal-time adaptation.
//!
//! A policy maps waypoints and a boundary state to segment durations. The
//! adaptation loop stretches a policy's output so the trajectory arrives at a
//! requested time, feeding the policy a boundary state expressed in the
//! stretched clock.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::minsnap::{optimize_time_allocation_with, scale_boundary, solve_qp_detailed, TimeOptimizerOptions};
use crate::types::{BoundaryState, DynamicLimits, SnapCostWeights, TimeAllocation, Vec3, WaypointSequence};

pub use crate::feasibility::check_feasibility;

pub trait TimeAllocationPolicy: Send + Sync {
    fn allocate(&self, waypoints: &WaypointSequence, boundary: &BoundaryState) -> Result<TimeAllocation>;

    /// Same contract as [`allocate`](Self::allocate); `hint` is a nearby
    /// earlier answer that iterative callers can pass to speed things up.
    fn allocate_with_hint(
        &self,
        waypoints: &WaypointSequence,
        boundary: &BoundaryState,
        hint: Option<&TimeAllocation>,
    ) -> Result<TimeAllocation> {
        let _ = hint;
        self.allocate(waypoints, boundary)
    }

    fn name(&self) -> &'static str;
}

/// Segment length over a fixed cruise speed.
pub fn baseline_allocate(waypoints: &WaypointSequence, _boundary: &BoundaryState, v_max: f64) -> Result<TimeAllocation> {
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(domain(format!("v_max must be positive, got {v_max}")));
    }
    TimeAllocation::new(waypoints.segment_lengths().iter().map(|d| d / v_max).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselinePolicy {
    pub v_max: f64,
}

impl Default for BaselinePolicy {
    fn default() -> Self {
        Self { v_max: 2.5 }
    }
}

impl TimeAllocationPolicy for BaselinePolicy {
    fn allocate(&self, waypoints: &WaypointSequence, boundary: &BoundaryState) -> Result<TimeAllocation> {
        baseline_allocate(waypoints, boundary, self.v_max)
    }

    fn name(&self) -> &'static str {
        "baseline"
    }
}

/// Uncached optimizer call.
pub fn optimizer_allocate(
    waypoints: &WaypointSequence,
    boundary: &BoundaryState,
    weights: &SnapCostWeights,
    limits: &DynamicLimits,
) -> Result<TimeAllocation> {
    optimize_time_allocation_with(waypoints, boundary, weights, limits, &TimeOptimizerOptions::default(), None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerPolicyConfig {
    pub weights: SnapCostWeights,
    pub limits: DynamicLimits,
    /// Rounding step for waypoint coordinates and yaws.
    pub position_quantum: f64,
    /// Rounding step for boundary-state components.
    pub boundary_quantum: f64,
    /// Fraction by which the limits are tightened inside the policy, so the
    /// answer for rounded inputs stays feasible for the exact ones.
    pub margin: f64,
    pub max_evaluations: usize,
}

impl Default for OptimizerPolicyConfig {
    fn default() -> Self {
        Self {
            weights: SnapCostWeights::default(),
            limits: DynamicLimits::default(),
            position_quantum: 0.05,
            boundary_quantum: 1e-3,
            margin: 0.01,
            max_evaluations: TimeOptimizerOptions::default().max_evaluations,
        }
    }
}

type CacheKey = Vec<i64>;

const CACHE_CAPACITY: usize = 8192;
/// Clamped boundary magnitudes stay this far inside the limits.
const CLAMP_FRACTION: f64 = 0.95;

/// Wraps the bi-level optimizer. Inputs are rounded to a lattice before the
/// search runs, which makes the output a pure function of the rounded inputs
/// and lets identical rounded queries share a cache entry.
#[derive(Debug)]
pub struct OptimizerPolicy {
    pub config: OptimizerPolicyConfig,
    cache: Mutex<HashMap<CacheKey, TimeAllocation>>,
}

impl Clone for OptimizerPolicy {
    fn clone(&self) -> Self {
        Self::new(self.config)
    }
}

impl Default for OptimizerPolicy {
    fn default() -> Self {
        Self::new(OptimizerPolicyConfig::default())
    }
}

fn quantize(v: f64, q: f64) -> i64 {
    (v / q).round() as i64
}

impl OptimizerPolicy {
    pub fn new(config: OptimizerPolicyConfig) -> Self {
        Self {
            config,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_limits(weights: SnapCostWeights, limits: DynamicLimits) -> Self {
        Self::new(OptimizerPolicyConfig {
            weights,
            limits,
            ..Default::default()
        })
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    fn canonical(&self, waypoints: &WaypointSequence, boundary: &BoundaryState) -> (CacheKey, WaypointSequence, BoundaryState) {
        let qp = self.config.position_quantum;
        let qb = self.config.boundary_quantum;
        let mut key = Vec::with_capacity(4 * (waypoints.segment_count() + 1) + 20);
        let snap_vec = |v: &Vec3, key: &mut Vec<i64>, q: f64| -> Vec3 {
            let k = [quantize(v.x, q), quantize(v.y, q), quantize(v.z, q)];
            key.extend_from_slice(&k);
            Vec3::new(k[0] as f64 * q, k[1] as f64 * q, k[2] as f64 * q)
        };
        let snap_scalar = |v: f64, key: &mut Vec<i64>, q: f64| -> f64 {
            let k = quantize(v, q);
            key.push(k);
            k as f64 * q
        };
        let start = snap_vec(&waypoints.start, &mut key, qp);
        let start_yaw = snap_scalar(waypoints.start_yaw, &mut key, qp);
        let intermediate: Vec<Vec3> = waypoints.intermediate.iter().map(|p| snap_vec(p, &mut key, qp)).collect();
        let intermediate_yaw: Vec<Option<f64>> = (0..waypoints.intermediate.len())
            .map(|i| match waypoints.intermediate_yaw_at(i) {
                Some(y) => Some(snap_scalar(y, &mut key, qp)),
                None => {
                    key.push(i64::MIN);
                    None
                }
            })
            .collect();
        let goal = snap_vec(&waypoints.goal, &mut key, qp);
        let goal_yaw = snap_scalar(waypoints.goal_yaw, &mut key, qp);
        let b = BoundaryState {
            velocity: snap_vec(&boundary.velocity, &mut key, qb),
            acceleration: snap_vec(&boundary.acceleration, &mut key, qb),
            jerk: snap_vec(&boundary.jerk, &mut key, qb),
            snap: snap_vec(&boundary.snap, &mut key, qb),
            yaw_rate: snap_scalar(boundary.yaw_rate, &mut key, qb),
            yaw_accel: snap_scalar(boundary.yaw_accel, &mut key, qb),
        };
        let wps = WaypointSequence {
            start,
            start_yaw,
            intermediate,
            intermediate_yaw,
            goal,
            goal_yaw,
        };
        (key, wps, b)
    }

    /// Limits used inside the search, tightened by the margin.
    fn search_limits(&self) -> DynamicLimits {
        let l = &self.config.limits;
        let f = 1.0 - self.config.margin;
        DynamicLimits {
            max_speed: l.max_speed * f,
            max_accel: l.max_accel * f,
            max_yaw_rate: l.max_yaw_rate * f,
        }
    }

    /// Moves a boundary state that exceeds the limit envelope back along its
    /// time-scaling curve until speed, acceleration and yaw rate fit.
    /// Stretched-clock queries can leave the envelope; without this no
    /// allocation would be feasible for them.
    fn clamp_boundary(&self, boundary: &BoundaryState) -> BoundaryState {
        let l = self.search_limits();
        let gamma = (boundary.velocity.norm() / (CLAMP_FRACTION * l.max_speed))
            .max((boundary.acceleration.norm() / (CLAMP_FRACTION * l.max_accel)).sqrt())
            .max(boundary.yaw_rate.abs() / (CLAMP_FRACTION * l.max_yaw_rate));
        if gamma > 1.0 {
            scale_boundary(boundary, gamma).unwrap_or(*boundary)
        } else {
            *boundary
        }
    }

    fn run(&self, waypoints: &WaypointSequence, boundary: &BoundaryState, hint: Option<&TimeAllocation>) -> Result<TimeAllocation> {
        let options = TimeOptimizerOptions {
            max_evaluations: self.config.max_evaluations,
            ..Default::default()
        };
        let boundary = self.clamp_boundary(boundary);
        match optimize_time_allocation_with(
            waypoints,
            &boundary,
            &self.config.weights,
            &self.search_limits(),
            &options,
            hint,
        ) {
            // The planner re-checks feasibility, so the least-violating
            // allocation is a usable answer.
            Err(Error::Infeasible { best, .. }) => Ok(best),
            other => other,
        }
    }
}

impl OptimizerPolicy {
    /// Rounding can move a marginal answer past the exact limits; rescale
    /// it on the exact inputs in that case.
    fn repair(&self, waypoints: &WaypointSequence, boundary: &BoundaryState, out: TimeAllocation) -> Result<TimeAllocation> {
        let exact_ok = |x: &TimeAllocation| {
            solve_qp_detailed(waypoints, boundary, x.durations())
                .map(|sol| check_feasibility(&sol.trajectory, &self.config.limits))
                .unwrap_or(false)
        };
        if exact_ok(&out) {
            return Ok(out);
        }
        match self.run(waypoints, boundary, Some(&out)) {
            Ok(x) if exact_ok(&x) => Ok(x),
            _ => Ok(out),
        }
    }
}

impl TimeAllocationPolicy for OptimizerPolicy {
    fn allocate(&self, waypoints: &WaypointSequence, boundary: &BoundaryState) -> Result<TimeAllocation> {
        self.allocate_with_hint(waypoints, boundary, None)
    }

    fn allocate_with_hint(
        &self,
        waypoints: &WaypointSequence,
        boundary: &BoundaryState,
        hint: Option<&TimeAllocation>,
    ) -> Result<TimeAllocation> {
        let (key, wps, b) = self.canonical(waypoints, boundary);
        if wps.validate().is_err() {
            // Rounding merged two waypoints; solve the exact problem instead.
            return self.run(waypoints, boundary, hint);
        }
        if hint.is_some() {
            return self.run(&wps, &b, hint);
        }
        let cached = self.cache.lock().ok().and_then(|c| c.get(&key).cloned());
        let out = match cached {
            Some(hit) => hit,
            None => {
                let out = self.run(&wps, &b, None)?;
                if let Ok(mut c) = self.cache.lock() {
                    if c.len() >= CACHE_CAPACITY {
                        c.clear();
                    }
                    c.insert(key, out.clone());
                }
                out
            }
        };
        self.repair(waypoints, boundary, out)
    }

    fn name(&self) -> &'static str {
        "optimizer"
    }
}

/// `1 − Σx / Σx_ms`.
pub fn time_reduction(x: &TimeAllocation, x_ms: &TimeAllocation) -> Result<f64> {
    if x.is_empty() || x_ms.is_empty() {
        return Err(domain("time_reduction needs non-empty allocations"));
    }
    Ok(1.0 - x.total() / x_ms.total())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationResult {
    pub alpha_goal: f64,
    /// Adapted durations; their sum matches the requested time when converged.
    pub allocation: TimeAllocation,
    /// `alpha_goal ≥ 1`.
    pub feasible: bool,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Return right after the first policy call when it already shows the
    /// goal time is shorter than the minimum traversal time. The result then
    /// carries the first estimate of `α_goal` and is marked unconverged.
    #[serde(default)]
    pub stop_when_unreachable: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: 10,
            stop_when_unreachable: false,
        }
    }
}

/// Fixed-point iteration `α ← α · T_goal / (α Σπ(p̃, αD))`, where the policy
/// sees the boundary derivatives in the stretched clock (`k`-th derivative
/// times `α^k`), started from `α = T_goal / Σπ(p̃, D)`. From the second step
/// on, a secant step in log space replaces the plain update when the local
/// slope is well defined, and bisection takes over whenever a step would
/// leave the bracket of known under- and overshoots.
pub fn adapt_traversal_time(
    policy: &dyn TimeAllocationPolicy,
    waypoints: &WaypointSequence,
    boundary: &BoundaryState,
    t_goal: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<AdaptationResult> {
    let config = AdaptationConfig {
        tolerance,
        max_iterations,
        stop_when_unreachable: false,
    };
    adapt_with(policy, waypoints, boundary, t_goal, &config)
}

/// [`adapt_traversal_time`] with a config struct.
pub fn adapt_with(
    policy: &dyn TimeAllocationPolicy,
    waypoints: &WaypointSequence,
    boundary: &BoundaryState,
    t_goal: f64,
    config: &AdaptationConfig,
) -> Result<AdaptationResult> {
    let (tolerance, max_iterations) = (config.tolerance, config.max_iterations);
    if !(t_goal.is_finite() && t_goal > 0.0) {
        return Err(domain(format!("T_goal must be positive, got {t_goal}")));
    }
    if !(tolerance > 0.0) || max_iterations == 0 {
        return Err(domain("tolerance must be positive and max_iterations at least 1"));
    }
    let degenerate = |x: &TimeAllocation| !(x.total().is_finite() && x.total() > 0.0);
    let mut prev_boundary = *boundary;
    let mut prev_out = policy.allocate(waypoints, boundary)?;
    if degenerate(&prev_out) {
        return Err(domain("policy returned a degenerate allocation"));
    }
    let mut alpha = t_goal / prev_out.total();
    // The stretched total α Σπ(p̃, α⁻¹D) grows with α, so it exceeds T_goal
    // at α = 1 exactly when the goal time is out of reach.
    if config.stop_when_unreachable && alpha < 1.0 - tolerance && !boundary.is_zero() {
        return Ok(AdaptationResult {
            alpha_goal: alpha,
            allocation: prev_out.scaled(alpha)?,
            feasible: false,
            iterations: 1,
            converged: false,
        });
    }
    let mut best: Option<(f64, f64, TimeAllocation)> = None;
    // Bracket on α: totals below T_goal at `lo`, above at `hi`.
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut last: Option<(f64, f64)> = None;

    for iteration in 1..=max_iterations {
        let query = scale_boundary(boundary, 1.0 / alpha)?;
        let out = if query == prev_boundary {
            prev_out.clone()
        } else {
            policy.allocate_with_hint(waypoints, &query, hint_for(&prev_out))?
        };
        if degenerate(&out) {
            return Err(domain("policy returned a degenerate allocation"));
        }
        let total = alpha * out.total();
        let err = (total - t_goal).abs();
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, alpha, out.clone()));
        }
        if err <= tolerance * t_goal {
            return Ok(AdaptationResult {
                alpha_goal: alpha,
                allocation: out.scaled(alpha)?,
                feasible: alpha >= 1.0,
                iterations: iteration,
                converged: true,
            });
        }
        if total < t_goal {
            lo = lo.max(alpha);
        } else {
            hi = hi.min(alpha);
        }
        prev_boundary = query;
        prev_out = out;
        // Work in u = ln α, h = ln(total / T_goal); the plain update is u − h.
        let (u, h) = (alpha.ln(), (total / t_goal).ln());
        let mut proposal = u - h;
        if let Some((u_prev, h_prev)) = last {
            let slope = (h - h_prev) / (u - u_prev);
            if slope.is_finite() && slope > 1e-3 {
                proposal = u - h / slope;
            }
        }
        last = Some((u, h));
        let (lo_u, hi_u) = (lo.ln(), hi.ln());
        // The policy output can jump with the boundary state; fall back to
        // bisection when a step leaves the bracket.
        alpha = if proposal > lo_u && proposal < hi_u {
            proposal.exp()
        } else if (u - h) > lo_u && (u - h) < hi_u {
            (u - h).exp()
        } else if lo > 0.0 && hi.is_finite() {
            (lo * hi).sqrt()
        } else {
            (u - h).exp()
        };
    }
    let (_, alpha, out) = best.expect("at least one iteration ran");
    Ok(AdaptationResult {
        alpha_goal: alpha,
        allocation: out.scaled(alpha)?,
        feasible: alpha >= 1.0,
        iterations: max_iterations,
        converged: false,
    })
}

fn hint_for(prev: &TimeAllocation) -> Option<&TimeAllocation> {
    Some(prev)
}
