mod common;

use common::rng;
use intercept_core::gridplan::GridPath;
use intercept_core::waypoints::{
    inverse_circumradius, knot_parameterization, raw_waypoint_count, select_waypoints, waypoint_count,
    WaypointSelectionConfig,
};
use intercept_core::Vec3;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn path(points: Vec<Vec3>) -> GridPath {
    let lattice_cost = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    GridPath { points, lattice_cost }
}

fn random_walk(r: &mut ChaCha8Rng) -> Vec<Vec3> {
    let n = r.random_range(2..400);
    let step = r.random_range(0.05..0.5);
    let mut pts = vec![Vec3::zeros()];
    let mut heading: f64 = 0.0;
    for _ in 1..n {
        heading += r.random_range(-1.5..1.5);
        let last = *pts.last().unwrap();
        pts.push(last + step * Vec3::new(heading.cos(), heading.sin(), r.random_range(-0.3..0.3)));
    }
    pts
}

#[test]
fn collinear_path_has_identically_zero_curvature() {
    let mut r = rng(1);
    for _ in 0..20 {
        let dir = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)).normalize();
        let mut s = 0.0;
        let pts: Vec<Vec3> = (0..50)
            .map(|_| {
                s += r.random_range(0.05..0.3);
                dir * s
            })
            .collect();
        let k = knot_parameterization(&pts).unwrap();
        assert!(k.k_c.iter().all(|&c| c == 0.0), "{:?}", k.k_c);
    }
}

#[test]
fn semicircle_curvature_sums_to_pi() {
    for (radius, n) in [(1.0, 60), (2.5, 200), (0.7, 33)] {
        let pts: Vec<Vec3> = (0..=n)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / n as f64;
                Vec3::new(radius * a.cos(), radius * a.sin(), 1.0)
            })
            .collect();
        let k = knot_parameterization(&pts).unwrap();
        let total = *k.k_c.last().unwrap();
        assert!((total - std::f64::consts::PI).abs() <= 0.05 * std::f64::consts::PI, "{total}");
    }
}

#[test]
fn circumradius_of_known_triangles() {
    // Right triangle: hypotenuse is the diameter.
    let v = inverse_circumradius(&Vec3::new(0.0, 0.0, 0.0), &Vec3::new(3.0, 0.0, 0.0), &Vec3::new(3.0, 4.0, 0.0));
    assert!((v - 1.0 / 2.5).abs() < 1e-12);
    // Equilateral triangle of side s: R = s / √3.
    let s = 2.0;
    let v = inverse_circumradius(
        &Vec3::new(0.0, 0.0, 0.0),
        &Vec3::new(s, 0.0, 0.0),
        &Vec3::new(s / 2.0, s * 3f64.sqrt() / 2.0, 0.0),
    );
    assert!((v - 3f64.sqrt() / s).abs() < 1e-12);
}

#[test]
fn count_is_clamped_on_random_paths() {
    let mut r = rng(2);
    let config = WaypointSelectionConfig::default();
    let mut saw = (false, false);
    for _ in 0..1000 {
        let pts = random_walk(&mut r);
        let k = knot_parameterization(&pts).unwrap();
        let n = waypoint_count(&k, &config);
        assert!((2..=14).contains(&n));
        let raw = raw_waypoint_count(&k, &config);
        saw.0 |= raw < 2.0;
        saw.1 |= raw > 14.0;
    }
    assert!(saw.0 && saw.1, "the sample should exercise both clamps");
}

#[test]
fn length_and_curvature_drive_the_count() {
    let config = WaypointSelectionConfig::default();
    // 7 m straight: ceil(7 / 2) = 4.
    let straight: Vec<Vec3> = (0..=70).map(|i| Vec3::new(0.1 * i as f64, 0.0, 1.0)).collect();
    assert_eq!(waypoint_count(&knot_parameterization(&straight).unwrap(), &config), 4);
    // A tight full circle turns 2π over ~1.9 m: curvature wins, ceil(2π / 1.5) = 5.
    let circle: Vec<Vec3> = (0..=120)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 120.0;
            Vec3::new(0.3 * a.cos(), 0.3 * a.sin(), 1.0)
        })
        .collect();
    assert_eq!(waypoint_count(&knot_parameterization(&circle).unwrap(), &config), 5);
}

#[test]
fn selection_yields_ordered_path_points() {
    let mut r = rng(3);
    let config = WaypointSelectionConfig::default();
    for _ in 0..200 {
        let pts = random_walk(&mut r);
        if pts.len() < 3 {
            continue;
        }
        let p = path(pts.clone());
        let start = pts[0];
        let goal = *pts.last().unwrap();
        let wps = select_waypoints(&p, &config, start, 0.3, goal).unwrap();
        assert_eq!(wps.start, start);
        assert_eq!(wps.goal, goal);
        assert_eq!(wps.start_yaw, 0.3);
        assert!(wps.segment_count() + 1 <= config.max_waypoints);
        // Intermediate waypoints are distinct path points in path order.
        let mut last_idx = 0;
        for w in &wps.intermediate {
            let idx = pts.iter().position(|q| q == w).expect("waypoint must lie on the path");
            assert!(idx > last_idx && idx < pts.len() - 1);
            last_idx = idx;
        }
    }
}

#[test]
fn invalid_bounds_are_rejected() {
    let bad = WaypointSelectionConfig {
        min_waypoints: 5,
        max_waypoints: 3,
        ..Default::default()
    };
    let p = path(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)]);
    assert!(select_waypoints(&p, &bad, Vec3::zeros(), 0.0, Vec3::new(2.0, 0.0, 0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knots_are_monotone(seed in 0u64..100_000) {
        let pts = random_walk(&mut rng(seed));
        let k = knot_parameterization(&pts).unwrap();
        for i in 1..pts.len() {
            prop_assert!(k.k_d[i] > k.k_d[i - 1]);
            prop_assert!(k.k_c[i] >= k.k_c[i - 1]);
            prop_assert!((k.k[i] - 0.5 * (k.k_d[i] + k.k_c[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_measure_is_rigid_motion_invariant(seed in 0u64..100_000, yaw in -3.0f64..3.0, shift in -5.0f64..5.0) {
        let pts = random_walk(&mut rng(seed));
        let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), yaw);
        let moved: Vec<Vec3> = pts.iter().map(|p| rot * p + Vec3::repeat(shift)).collect();
        let a = knot_parameterization(&pts).unwrap();
        let b = knot_parameterization(&moved).unwrap();
        let (ca, cb) = (*a.k_c.last().unwrap(), *b.k_c.last().unwrap());
        prop_assert!((ca - cb).abs() <= 1e-7 * ca.max(1.0));
    }
}
