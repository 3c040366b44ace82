//! Browser bindings. Every export takes plain numbers or strings and returns a
//! JSON document that the page draws on a canvas.

use intercept_core::gridplan::{multi_resolution_astar, shortcut_path, OccupancyGrid, ResolutionSchedule};
use intercept_core::minsnap::solve_qp_detailed;
use intercept_core::policy::{baseline_allocate, OptimizerPolicy, TimeAllocationPolicy};
use intercept_core::sim::{run_scenario, DeskEnvironment, PolicyChoice, PredictorChoice, Scenario};
use intercept_core::{Aabb, BoundaryState, Vec3, WaypointSequence};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const FLIGHT_HEIGHT: f64 = 1.0;

#[derive(Serialize)]
struct Room {
    min: [f64; 2],
    max: [f64; 2],
    obstacles: Vec<[f64; 4]>,
    padding: f64,
}

impl Room {
    fn new(scenario: &Scenario) -> Self {
        let rect = |b: &Aabb| [b.min.x, b.min.y, b.max.x, b.max.y];
        let g = &scenario.grid;
        Room {
            min: [g.bounds.min.x, g.bounds.min.y],
            max: [g.bounds.max.x, g.bounds.max.y],
            obstacles: g.obstacles.iter().map(rect).collect(),
            padding: g.padding,
        }
    }
}

#[derive(Serialize)]
struct TrajectoryView {
    durations: Vec<f64>,
    total: f64,
    peak_speed: f64,
    /// `[t, x, y, z, speed]`
    samples: Vec<[f64; 5]>,
}

#[derive(Serialize)]
struct PathView {
    room: Room,
    found: bool,
    raw: Vec<[f64; 2]>,
    shortcut: Vec<[f64; 2]>,
    length: f64,
}

#[derive(Serialize)]
struct InterceptView {
    room: Room,
    success: bool,
    intercept_time: Option<f64>,
    min_distance: f64,
    cycles: usize,
    fallback_cycles: usize,
    hold_cycles: usize,
    /// `[t, target x, target y, interceptor x, interceptor y]`
    trace: Vec<[f64; 5]>,
}

fn environment(name: &str) -> Result<DeskEnvironment, String> {
    serde_json::from_value(serde_json::Value::String(name.into())).map_err(|_| format!("unknown environment `{name}`"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Minimum-snap trajectory from rest through `xy` (flat x, y pairs) at
/// flight height. `policy` is `optimizer` or `baseline`.
pub fn plan_through_points(xy: &[f64], policy: &str, v_max: f64) -> Result<String, String> {
    if xy.len() < 4 || xy.len() % 2 != 0 {
        return Err("need at least two points given as x, y pairs".into());
    }
    let pts: Vec<Vec3> = xy.chunks(2).map(|c| Vec3::new(c[0], c[1], FLIGHT_HEIGHT)).collect();
    let (start, goal) = (pts[0], pts[pts.len() - 1]);
    let wps = WaypointSequence::new(start, 0.0, pts[1..pts.len() - 1].to_vec(), goal, 0.0).map_err(|e| e.to_string())?;
    let alloc = match policy {
        "optimizer" => OptimizerPolicy::default().allocate(&wps, &BoundaryState::ZERO),
        "baseline" => baseline_allocate(&wps, &BoundaryState::ZERO, v_max),
        other => return Err(format!("unknown policy `{other}`")),
    }
    .map_err(|e| e.to_string())?;
    let traj = solve_qp_detailed(&wps, &BoundaryState::ZERO, alloc.durations())
        .map_err(|e| e.to_string())?
        .trajectory;
    let total = traj.total_time();
    let samples: Vec<[f64; 5]> = (0..=400)
        .map(|i| {
            let t = total * i as f64 / 400.0;
            let p = traj.evaluate_clamped(t, 0).position;
            let v = traj.evaluate_clamped(t, 1).position.norm();
            [t, p.x, p.y, p.z, v]
        })
        .collect();
    to_json(&TrajectoryView {
        durations: alloc.durations().to_vec(),
        total,
        peak_speed: samples.iter().map(|s| s[4]).fold(0.0, f64::max),
        samples,
    })
}

/// Grid search from `(sx, sy)` to `(gx, gy)` at flight height in one of the
/// built-in rooms, before and after shortcutting.
pub fn search_room(env: &str, sx: f64, sy: f64, gx: f64, gy: f64) -> Result<String, String> {
    let scenario = environment(env)?.scenario(1.0, 0.5);
    let grid = OccupancyGrid::from_spec(scenario.grid.clone()).map_err(|e| e.to_string())?;
    let start = Vec3::new(sx, sy, FLIGHT_HEIGHT);
    let goal = Vec3::new(gx, gy, FLIGHT_HEIGHT);
    let flat = |p: &[Vec3]| p.iter().map(|q| [q.x, q.y]).collect::<Vec<_>>();
    let found = if grid.is_free(&start) && grid.is_free(&goal) {
        let schedule = ResolutionSchedule::DistanceBased {
            room_diagonal: grid.diagonal(),
        };
        multi_resolution_astar(&grid, start, &[goal], schedule)
            .map_err(|e| e.to_string())?
            .into_iter()
            .next()
            .flatten()
    } else {
        None
    };
    let view = match found {
        Some(path) => {
            let short = shortcut_path(&grid, &path);
            PathView {
                room: Room::new(&scenario),
                found: true,
                raw: flat(&path.points),
                length: short.length(),
                shortcut: flat(&short.points),
            }
        }
        None => PathView {
            room: Room::new(&scenario),
            found: false,
            raw: vec![],
            shortcut: vec![],
            length: 0.0,
        },
    };
    to_json(&view)
}

/// Closed-loop interception run against a random target.
pub fn simulate_interception(
    env: &str,
    target_speed: f64,
    departure_delay: f64,
    seed: u64,
    predictor: &str,
    baseline_v_max: Option<f64>,
) -> Result<String, String> {
    let mut scenario = environment(env)?.scenario(target_speed, departure_delay);
    scenario.predictor = match predictor {
        "ground_truth" => PredictorChoice::GroundTruth,
        "noisy" => PredictorChoice::Noisy,
        "none" => PredictorChoice::NoPrediction,
        other => return Err(format!("unknown predictor `{other}`")),
    };
    if let Some(v_max) = baseline_v_max {
        scenario.policy = PolicyChoice::Baseline { v_max };
    }
    let r = run_scenario(&scenario, seed).map_err(|e| e.to_string())?;
    to_json(&InterceptView {
        room: Room::new(&scenario),
        success: r.success,
        intercept_time: r.intercept_time,
        min_distance: r.min_distance,
        cycles: r.cycles,
        fallback_cycles: r.fallback_cycles,
        hold_cycles: r.hold_cycles,
        trace: r
            .trace
            .iter()
            .step_by(5)
            .map(|s| [s.t, s.target.x, s.target.y, s.defense.x, s.defense.y])
            .collect(),
    })
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = planThroughPoints)]
pub fn plan_through_points_js(xy: &[f64], policy: &str, v_max: f64) -> Result<String, JsError> {
    js(plan_through_points(xy, policy, v_max))
}

#[wasm_bindgen(js_name = searchRoom)]
pub fn search_room_js(env: &str, sx: f64, sy: f64, gx: f64, gy: f64) -> Result<String, JsError> {
    js(search_room(env, sx, sy, gx, gy))
}

/// `baseline_v_max <= 0` selects the optimizer policy.
#[wasm_bindgen(js_name = simulateInterception)]
pub fn simulate_interception_js(
    env: &str,
    target_speed: f64,
    departure_delay: f64,
    seed: u32,
    predictor: &str,
    baseline_v_max: f64,
) -> Result<String, JsError> {
    let baseline = (baseline_v_max > 0.0).then_some(baseline_v_max);
    js(simulate_interception(env, target_speed, departure_delay, seed as u64, predictor, baseline))
}
