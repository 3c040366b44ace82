//! Closed-loop interception: the target replays a reference trajectory while
//! the interceptor flies its latest plan exactly and replans at a fixed rate.

mod env;
mod sweep;

use std::path::PathBuf;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::feasibility::{check_feasibility, peak_magnitudes};
use crate::gridplan::{GridSpec, OccupancyGrid};
use crate::minsnap::{scale_trajectory, solve_qp_with_end};
use crate::planner::{Planner, PlannerConfig, VehicleState};
use crate::policy::{baseline_allocate, BaselinePolicy, OptimizerPolicy, OptimizerPolicyConfig, TimeAllocationPolicy};
use crate::predict::{ConditionalPredictor, GaussianMixtureModel, Predictor};
use crate::trajectory::PiecewisePolynomialTrajectory;
use crate::types::{BoundaryState, SnapCostWeights, Vec3, WaypointSequence};

pub use env::{random_target_waypoints, DeskEnvironment};
pub use sweep::{run_sweep, run_sweep_observed, run_sweep_with, SweepCell, SweepTable};

/// Minimum-snap trajectory through `waypoints` at constant-speed durations,
/// coming to rest at the last waypoint and slowed down uniformly until its
/// sampled peak speed is within `max_speed`.
pub fn make_target_trajectory(waypoints: &WaypointSequence, max_speed: f64) -> Result<PiecewisePolynomialTrajectory> {
    let alloc = baseline_allocate(waypoints, &BoundaryState::ZERO, max_speed)?;
    let mut traj = solve_qp_with_end(waypoints, &BoundaryState::ZERO, alloc.durations(), Some(&BoundaryState::ZERO))?.trajectory;
    for _ in 0..4 {
        let peak = peak_magnitudes(&traj).speed;
        if peak <= max_speed {
            break;
        }
        traj = scale_trajectory(&traj, peak / max_speed * (1.0 + 1e-12))?;
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Waypoints { points: Vec<Vec3>, max_speed: f64 },
    /// Random free waypoints drawn from the run seed.
    Random { waypoints: usize, max_speed: f64, min_leg: f64 },
}

impl TargetSpec {
    pub fn max_speed(&self) -> f64 {
        match self {
            TargetSpec::Waypoints { max_speed, .. } | TargetSpec::Random { max_speed, .. } => *max_speed,
        }
    }

    pub fn with_max_speed(&self, speed: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            TargetSpec::Waypoints { max_speed, .. } | TargetSpec::Random { max_speed, .. } => *max_speed = speed,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorChoice {
    GroundTruth,
    Noisy,
    Gmm { model: PathBuf },
    NoPrediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyChoice {
    /// Constant-speed durations.
    Baseline { v_max: f64 },
    Optimizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: GridSpec,
    pub target: TargetSpec,
    pub defense_start: Vec3,
    #[serde(default)]
    pub defense_yaw: f64,
    /// Interceptor waits this long before its first plan (s).
    pub departure_delay: f64,
    pub replan_period: f64,
    pub predictor: PredictorChoice,
    pub policy: PolicyChoice,
    pub success_radius: f64,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub weights: SnapCostWeights,
    /// Simulation step (s).
    #[serde(default = "default_step")]
    pub step: f64,
    /// Time simulated past the end of the target trajectory (s).
    #[serde(default = "default_overrun")]
    pub overrun: f64,
}

fn default_step() -> f64 {
    0.01
}

fn default_overrun() -> f64 {
    2.0
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.replan_period > 0.0 && self.success_radius > 0.0 && self.step > 0.0) {
            return Err(domain("replan period, success radius and step must be positive"));
        }
        if !(self.departure_delay >= 0.0 && self.overrun >= 0.0) {
            return Err(domain("departure delay and overrun must be non-negative"));
        }
        if !(self.target.max_speed() > 0.0) {
            return Err(domain("target speed must be positive"));
        }
        self.planner.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Builds the stateful pieces of a run. A mixture model path is read
    /// relative to the working directory.
    pub fn resources(&self) -> Result<Resources> {
        self.validate()?;
        let grid = Arc::new(OccupancyGrid::from_spec(self.grid.clone())?);
        let predictor = match &self.predictor {
            PredictorChoice::GroundTruth => Predictor::GroundTruth,
            PredictorChoice::Noisy => Predictor::Noisy,
            PredictorChoice::NoPrediction => Predictor::NoPrediction,
            PredictorChoice::Gmm { model } => {
                let m = GaussianMixtureModel::from_json(&std::fs::read_to_string(model)?)?;
                Predictor::Gmm(Arc::new(ConditionalPredictor::new(&m)?))
            }
        };
        Ok(Resources {
            grid,
            predictor,
            policy: self.make_policy(),
        })
    }

    pub fn make_policy(&self) -> Arc<dyn TimeAllocationPolicy> {
        match self.policy {
            PolicyChoice::Baseline { v_max } => Arc::new(BaselinePolicy { v_max }),
            PolicyChoice::Optimizer => Arc::new(OptimizerPolicy::new(OptimizerPolicyConfig {
                weights: self.weights,
                limits: self.planner.limits,
                ..Default::default()
            })),
        }
    }

    pub fn target_waypoints(&self, grid: &OccupancyGrid, seed: u64) -> Result<WaypointSequence> {
        match &self.target {
            TargetSpec::Waypoints { points, .. } => {
                if points.len() < 2 {
                    return Err(domain("target needs at least two waypoints"));
                }
                let n = points.len();
                WaypointSequence::new(points[0], 0.0, points[1..n - 1].to_vec(), points[n - 1], 0.0)
            }
            TargetSpec::Random { waypoints, min_leg, .. } => {
                random_target_waypoints(grid, *waypoints, *min_leg, self.defense_start, seed)
            }
        }
    }
}

/// Grid, predictor and policy shared by the runs of one scenario.
#[derive(Clone)]
pub struct Resources {
    pub grid: Arc<OccupancyGrid>,
    pub predictor: Predictor,
    pub policy: Arc<dyn TimeAllocationPolicy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub target: Vec3,
    pub defense: Vec3,
    pub distance: f64,
    /// Candidate index of the plan being flown, if any.
    pub candidate: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub success: bool,
    pub intercept_time: Option<f64>,
    pub min_distance: f64,
    pub cycles: usize,
    pub fallback_cycles: usize,
    pub hold_cycles: usize,
    /// Cycles whose selected plan was within the true limits and was flown.
    pub adopted_cycles: usize,
    /// Wall-clock time per cycle (ms). These differ between runs, so they are
    /// written to separate timing files rather than with the result.
    #[serde(skip)]
    pub cycle_ms: Vec<f64>,
    /// Per-cycle `[prediction, search, optimisation]` split (ms).
    #[serde(skip)]
    pub cycle_split_ms: Vec<[f64; 3]>,
    pub trace: Vec<TraceSample>,
}

impl SimResult {
    pub fn max_cycle_ms(&self) -> f64 {
        self.cycle_ms.iter().cloned().fold(0.0, f64::max)
    }
}

/// The plan being flown and when it started.
struct Flight {
    traj: PiecewisePolynomialTrajectory,
    t0: f64,
    candidate: usize,
}

pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<SimResult> {
    let res = scenario.resources()?;
    run_scenario_with(scenario, &res, seed)
}

pub fn run_scenario_with(scenario: &Scenario, res: &Resources, seed: u64) -> Result<SimResult> {
    scenario.validate()?;
    let grid = &*res.grid;
    let target = make_target_trajectory(&scenario.target_waypoints(grid, seed)?, scenario.target.max_speed())?;
    let planner = Planner::new(grid, &*res.policy, &scenario.planner);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fc7_c1e5);

    let t_end = target.total_time() + scenario.overrun;
    let steps = (t_end / scenario.step).round() as usize;
    let replan_every = ((scenario.replan_period / scenario.step).round() as usize).max(1);
    let depart = (scenario.departure_delay / scenario.step).round() as usize;

    let mut flight: Option<Flight> = None;
    let mut out = SimResult {
        success: false,
        intercept_time: None,
        min_distance: f64::INFINITY,
        cycles: 0,
        fallback_cycles: 0,
        hold_cycles: 0,
        adopted_cycles: 0,
        cycle_ms: Vec::new(),
        cycle_split_ms: Vec::new(),
        trace: Vec::with_capacity(steps + 1),
    };
    let state_at = |f: &Option<Flight>, t: f64| -> VehicleState {
        match f {
            Some(f) => {
                let p = f.traj.evaluate_clamped(t - f.t0, 0);
                VehicleState {
                    position: p.position,
                    yaw: p.yaw,
                    boundary: f.traj.boundary_at(t - f.t0),
                }
            }
            None => VehicleState {
                position: scenario.defense_start,
                yaw: scenario.defense_yaw,
                boundary: BoundaryState::ZERO,
            },
        }
    };

    for i in 0..=steps {
        let t = i as f64 * scenario.step;
        if i >= depart && (i - depart) % replan_every == 0 {
            let state = state_at(&flight, t);
            let cycle_seed = rng.next_u64();
            out.cycles += 1;
            match planner.plan_cycle(&res.predictor, &state, &target, t, cycle_seed) {
                Ok(r) => {
                    out.cycle_ms.push(r.timing.total_ms);
                    out.cycle_split_ms
                        .push([r.timing.prediction_ms, r.timing.search_ms, r.timing.optimization_ms]);
                    if r.fallback {
                        out.fallback_cycles += 1;
                    }
                    let plan = r.selected_plan();
                    if check_feasibility(&plan.trajectory, &scenario.planner.limits) {
                        out.adopted_cycles += 1;
                        flight = Some(Flight {
                            traj: plan.trajectory.clone(),
                            t0: t,
                            candidate: plan.index,
                        });
                    }
                }
                Err(Error::HoldPosition) => {
                    log::info!("t = {t:.2} s: no reachable candidate, keeping the current plan");
                    out.hold_cycles += 1;
                }
                Err(e) => {
                    log::warn!("t = {t:.2} s: planning failed: {e}");
                    out.hold_cycles += 1;
                }
            }
        }
        let s = state_at(&flight, t);
        let p = target.position_at(t);
        let d = (s.position - p).norm();
        out.min_distance = out.min_distance.min(d);
        out.trace.push(TraceSample {
            t,
            target: p,
            defense: s.position,
            distance: d,
            candidate: flight.as_ref().map(|f| f.candidate),
        });
        if d <= scenario.success_radius {
            out.success = true;
            out.intercept_time = Some(t);
            break;
        }
    }
    Ok(out)
}

/// Trace rows `t, target xyz, defense xyz, distance, candidate`.
#[cfg(feature = "native")]
pub fn write_trace_csv<W: std::io::Write>(result: &SimResult, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["t", "target_x", "target_y", "target_z", "defense_x", "defense_y", "defense_z", "distance", "candidate"])
        .map_err(csv_err)?;
    for s in &result.trace {
        csv.write_record([
            format!("{:.2}", s.t),
            s.target.x.to_string(),
            s.target.y.to_string(),
            s.target.z.to_string(),
            s.defense.x.to_string(),
            s.defense.y.to_string(),
            s.defense.z.to_string(),
            s.distance.to_string(),
            s.candidate.map_or(String::new(), |c| c.to_string()),
        ])
        .map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(feature = "native")]
pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
