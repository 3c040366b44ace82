use intercept_core::sim::{
    make_target_trajectory, run_scenario, run_scenario_with, run_sweep_with, write_trace_csv, DeskEnvironment,
    PredictorChoice, Scenario, TargetSpec,
};
use intercept_core::feasibility::peak_magnitudes;
use intercept_core::{DynamicLimits, Vec3, WaypointSequence};

fn fixed_target(points: Vec<Vec3>, max_speed: f64) -> Scenario {
    let mut sc = DeskEnvironment::EmptyRoom.scenario(max_speed, 0.0);
    sc.target = TargetSpec::Waypoints { points, max_speed };
    sc
}

#[test]
fn target_trajectory_respects_its_speed() {
    let wps = WaypointSequence::direct(Vec3::zeros(), 0.0, Vec3::new(5.0, 0.0, 0.0), 0.0).unwrap();
    let slow = make_target_trajectory(&wps, 1.0).unwrap();
    assert!(peak_magnitudes(&slow).speed <= 1.0 + 1e-6);
    let fast = make_target_trajectory(&wps, 2.0).unwrap();
    assert!(fast.total_time() <= slow.total_time());
    assert!((slow.end_position() - wps.goal).norm() < 1e-6);
    // Comes to rest at the goal.
    assert!(slow.boundary_at(slow.total_time()).velocity.norm() < 1e-6);
}

#[test]
fn nearly_stationary_target_is_caught() {
    let mut sc = fixed_target(vec![Vec3::new(3.0, 1.0, 1.0), Vec3::new(3.01, 1.0, 1.0)], 0.01);
    sc.defense_start = Vec3::new(2.0, 1.0, 1.0);
    let r = run_scenario(&sc, 0).unwrap();
    assert!(r.success);
    assert!(r.intercept_time.unwrap() < 5.0);
    assert!(r.min_distance <= sc.success_radius);
}

#[test]
fn unreachably_fast_target_is_missed() {
    let mut sc = fixed_target(vec![Vec3::new(2.0, 8.0, 1.0), Vec3::new(8.0, 8.0, 1.0)], 100.0);
    sc.planner.limits = DynamicLimits {
        max_speed: 0.5,
        max_accel: 1.0,
        max_yaw_rate: 1.0,
    };
    let r = run_scenario(&sc, 0).unwrap();
    assert!(!r.success);
    assert!(r.cycles > 0);
    assert_eq!(r.fallback_cycles + r.hold_cycles, r.cycles);
}

#[test]
fn departure_after_the_target_stops_is_a_miss() {
    let mut sc = DeskEnvironment::EmptyRoom.scenario(1.0, 1000.0);
    sc.overrun = 0.5;
    let r = run_scenario(&sc, 1).unwrap();
    assert!(!r.success);
    assert_eq!(r.cycles, 0);
}

#[test]
fn runs_are_reproducible() {
    let mut sc = DeskEnvironment::PillaredRoom.scenario(1.0, 0.5);
    sc.predictor = PredictorChoice::Noisy;
    let res = sc.resources().unwrap();
    let a = run_scenario_with(&sc, &res, 3).unwrap();
    let b = run_scenario_with(&sc, &res, 3).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    write_trace_csv(&a, &mut ca).unwrap();
    write_trace_csv(&b, &mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(a.trace.len(), String::from_utf8(ca).unwrap().lines().count() - 1);
}

#[test]
fn ground_truth_chase_in_the_empty_room() {
    let sc = DeskEnvironment::EmptyRoom.scenario(1.0, 0.5);
    let res = sc.resources().unwrap();
    for seed in 0..3 {
        let r = run_scenario_with(&sc, &res, seed).unwrap();
        assert!(r.success, "seed {seed}: min distance {}", r.min_distance);
        assert!(r.adopted_cycles > 0);
        assert_eq!(r.cycle_ms.len(), r.cycles - r.hold_cycles);
        // The trace stays inside the room.
        assert!(r.trace.iter().all(|s| s.defense.iter().zip(sc.grid.bounds.max.iter()).all(|(p, m)| *p >= 0.0 && p <= m)));
    }
}

#[test]
fn sweep_table_has_one_cell_per_combination() {
    let sc = DeskEnvironment::EmptyRoom.scenario(1.0, 0.5);
    let res = sc.resources().unwrap();
    let t = run_sweep_with(&sc, &res, &[0.5, 1.0], &[0.5, 1.5], &[0, 1]).unwrap();
    assert_eq!(t.cells.len(), 4);
    for c in &t.cells {
        assert_eq!(c.runs, 2);
        assert!(c.successes <= c.runs);
    }
    let mut csv = Vec::new();
    t.write_csv(&mut csv, false).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
}

#[test]
fn scenario_json_roundtrip() {
    for env in DeskEnvironment::ALL {
        let sc = env.scenario(1.5, 1.0);
        assert_eq!(Scenario::from_json(&sc.to_json().unwrap()).unwrap(), sc);
    }
    let mut bad = DeskEnvironment::EmptyRoom.scenario(1.0, 0.5);
    bad.replan_period = 0.0;
    assert!(Scenario::from_json(&bad.to_json().unwrap()).is_err());
}
