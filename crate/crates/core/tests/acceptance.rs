//! End-to-end acceptance checks. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use common::{
    adaptation_case, box_distance, dense_channels, dijkstra, random_mixture, random_waypoints, random_world, rng,
};
use intercept_core::cli::{execute, Command, RunArgs, SweepArgs};
use intercept_core::gridplan::{multi_resolution_astar, ResolutionSchedule};
use intercept_core::minsnap::solve_qp_detailed;
use intercept_core::planner::{select_plan, SelectionConfig, SelectionEntry};
use intercept_core::policy::{adapt_traversal_time, OptimizerPolicy, TimeAllocationPolicy};
use intercept_core::predict::{
    generate_training_set, gmm_condition, gmm_fit, gmm_fit_with, ConditionalPredictor, GaussianMixture,
    GaussianMixtureModel, GmmFitOptions, Predictor, TrainingConfig,
};
use intercept_core::sim::{run_scenario_with, run_sweep_with, DeskEnvironment, PolicyChoice, PredictorChoice};
use intercept_core::waypoints::{knot_parameterization, waypoint_count, WaypointSelectionConfig};
use intercept_core::gridplan::OccupancyGrid;
use intercept_core::{BoundaryState, SnapCostWeights, Vec3};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scaling_invariance() -> Check {
    let t0 = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = r.random_range(2..=8);
        let wps = random_waypoints(&mut r, m);
        let x: Vec<f64> = (0..m).map(|_| r.random_range(0.5..2.0)).collect();
        let base = solve_qp_detailed(&wps, &BoundaryState::ZERO, &x).unwrap().trajectory;
        for alpha in [0.5, 2.0, 3.0] {
            let xs: Vec<f64> = x.iter().map(|d| d * alpha).collect();
            let scaled = solve_qp_detailed(&wps, &BoundaryState::ZERO, &xs).unwrap().trajectory;
            for (t, p, _) in base.sample_uniform(200) {
                worst = worst.max((scaled.position_at(alpha * t) - p).norm());
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(worst < 1e-6, || format!("max deviation {worst:e} m"))?;
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("max deviation {worst:.1e} m over 60 cases in {secs:.2} s"))
}

fn snap_cost_law() -> Check {
    let mut r = rng(102);
    let w = SnapCostWeights {
        mu_psi: 0.0,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = r.random_range(1..=8);
        let wps = random_waypoints(&mut r, m);
        let x: Vec<f64> = (0..m).map(|_| r.random_range(0.5..2.0)).collect();
        let alpha = r.random_range(0.3..4.0);
        let xs: Vec<f64> = x.iter().map(|d| d * alpha).collect();
        let a = solve_qp_detailed(&wps, &BoundaryState::ZERO, &x).unwrap().smoothness_cost(&w);
        let b = solve_qp_detailed(&wps, &BoundaryState::ZERO, &xs).unwrap().smoothness_cost(&w);
        worst = worst.max((b / (a * alpha.powi(-7)) - 1.0).abs());
    }
    ensure(worst < 1e-6, || format!("relative error {worst:e}"))?;
    Ok(format!("worst relative error {worst:.1e} on 20 cases"))
}

fn qp_correctness() -> Check {
    let mut r = rng(103);
    let (mut stat, mut interp): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let m = r.random_range(1..=8);
        let wps = random_waypoints(&mut r, m);
        let b = common::random_boundary(&mut r, 0.5);
        let x: Vec<f64> = (0..m).map(|_| r.random_range(0.5..2.0)).collect();
        let traj = solve_qp_detailed(&wps, &b, &x).unwrap().trajectory;
        for (ch, dense) in dense_channels(&wps, &b, &x).iter().enumerate() {
            let coeffs: Vec<Vec<f64>> = traj
                .segments
                .iter()
                .map(|s| [&s.coeffs_x, &s.coeffs_y, &s.coeffs_z, &s.coeffs_yaw][ch].clone())
                .collect();
            stat = stat.max(dense.kkt_residuals(&coeffs).0);
        }
        let joints = traj.joint_times();
        for (t, p) in joints.iter().zip(wps.points().iter().skip(1)) {
            interp = interp.max((traj.evaluate(*t, 0).unwrap().position - p).norm());
        }
        interp = interp.max((traj.end_position() - wps.goal).norm());
    }
    let mut gap: f64 = 0.0;
    for _ in 0..10 {
        let m = r.random_range(1..=3);
        let wps = random_waypoints(&mut r, m);
        let b = common::random_boundary(&mut r, 0.5);
        let x: Vec<f64> = (0..m).map(|_| r.random_range(0.6..1.6)).collect();
        let traj = solve_qp_detailed(&wps, &b, &x).unwrap().trajectory;
        for (ch, dense) in dense_channels(&wps, &b, &x).iter().enumerate() {
            let oracle = dense.solve();
            let scale = oracle.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
            for (seg, o) in traj.segments.iter().zip(&oracle) {
                let c = [&seg.coeffs_x, &seg.coeffs_y, &seg.coeffs_z, &seg.coeffs_yaw][ch];
                for (a, b) in c.iter().zip(o) {
                    gap = gap.max((a - b).abs() / scale);
                }
            }
        }
    }
    ensure(stat < 1e-6, || format!("stationarity {stat:e}"))?;
    ensure(interp < 1e-8, || format!("interpolation error {interp:e} m"))?;
    ensure(gap < 1e-8, || format!("dense coefficient gap {gap:e}"))?;
    Ok(format!("stationarity {stat:.1e}, interpolation {interp:.1e} m, dense gap {gap:.1e} (relative)"))
}

fn adaptation() -> Check {
    let policy = OptimizerPolicy::default();
    let mut r = rng(104);
    for _ in 0..20 {
        let m = r.random_range(2..=8);
        let wps = random_waypoints(&mut r, m);
        let base = policy.allocate(&wps, &BoundaryState::ZERO).unwrap();
        let t_goal = base.total() * r.random_range(0.5..3.0);
        let out = adapt_traversal_time(&policy, &wps, &BoundaryState::ZERO, t_goal, 1e-3, 10).unwrap();
        ensure(out.iterations == 1 && out.converged, || {
            format!("zero boundary took {} iterations", out.iterations)
        })?;
    }
    let mut converged = 0;
    let mut below_ok = 0;
    for _ in 0..100 {
        let (wps, b) = adaptation_case(&mut r);
        let base = policy.allocate(&wps, &b).unwrap();
        let t_goal = base.total() * r.random_range(1.0..2.5);
        let out = adapt_traversal_time(&policy, &wps, &b, t_goal, 1e-3, 10).unwrap();
        if out.converged && out.iterations <= 10 && (out.allocation.total() - t_goal).abs() <= 1e-3 * t_goal {
            converged += 1;
        }
        let short = adapt_traversal_time(&policy, &wps, &b, 0.6 * base.total(), 1e-3, 10).unwrap();
        if short.alpha_goal < 1.0 && !short.feasible {
            below_ok += 1;
        }
    }
    ensure(converged >= 95, || format!("{converged}/100 moving-start cases converged"))?;
    ensure(below_ok == 100, || format!("{below_ok}/100 below-minimum cases flagged"))?;
    Ok(format!(
        "zero boundary 20/20 in one step; moving start {converged}/100 within 10 steps; below minimum {below_ok}/100 flagged"
    ))
}

fn astar_validity() -> Check {
    let mut r = rng(105);
    let (mut worst_single, mut worst_multi): (f64, f64) = (0.0, 1.0);
    for case in 0..20 {
        let (grid, obstacles, start, goals) = random_world(&mut r, 5);
        let single = multi_resolution_astar(&grid, start, &goals[..1], ResolutionSchedule::Fixed).unwrap();
        let reference = dijkstra(&grid, &start, &goals[0]).unwrap();
        worst_single = worst_single.max((single[0].as_ref().unwrap().lattice_cost - reference).abs());
        let multi = multi_resolution_astar(&grid, start, &goals, ResolutionSchedule::Fixed).unwrap();
        for (g, p) in goals.iter().zip(&multi) {
            let p = p.as_ref().ok_or_else(|| format!("case {case}: reachable goal without a path"))?;
            worst_multi = worst_multi.max(p.lattice_cost / dijkstra(&grid, &start, g).unwrap());
            for q in &p.points {
                ensure(grid.is_free(q), || format!("case {case}: occupied path point"))?;
                for b in &obstacles {
                    ensure(box_distance(b, q) >= 0.5 - 1e-9, || format!("case {case}: padding violated"))?;
                }
            }
        }
    }
    ensure(worst_single < 1e-9, || format!("single-goal cost differs by {worst_single:e}"))?;
    ensure(worst_multi <= 1.1, || format!("multi-goal cost ratio {worst_multi}"))?;
    Ok(format!("single-goal gap {worst_single:.1e} m, worst multi-goal ratio {worst_multi:.4}, padding held"))
}

fn waypoint_selection() -> Check {
    let straight: Vec<Vec3> = (0..100).map(|i| Vec3::new(0.07 * i as f64, -0.03 * i as f64, 0.02 * i as f64)).collect();
    let k = knot_parameterization(&straight).unwrap();
    ensure(k.k_c.iter().all(|c| *c == 0.0), || "collinear path has curvature".into())?;
    let mut r = rng(106);
    let config = WaypointSelectionConfig::default();
    let (mut lo, mut hi) = (usize::MAX, 0);
    for _ in 0..1000 {
        let n = r.random_range(2..400);
        let step = r.random_range(0.05..0.5);
        let mut heading: f64 = 0.0;
        let mut pts = vec![Vec3::zeros()];
        for _ in 1..n {
            heading += r.random_range(-1.5..1.5);
            let last = *pts.last().unwrap();
            pts.push(last + step * Vec3::new(heading.cos(), heading.sin(), r.random_range(-0.3..0.3)));
        }
        let c = waypoint_count(&knot_parameterization(&pts).unwrap(), &config);
        lo = lo.min(c);
        hi = hi.max(c);
    }
    ensure(lo >= 2 && hi <= 14, || format!("count range [{lo}, {hi}]"))?;
    let semi: Vec<Vec3> = (0..=60)
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / 60.0;
            Vec3::new(a.cos(), a.sin(), 0.0)
        })
        .collect();
    let total = *knot_parameterization(&semi).unwrap().k_c.last().unwrap();
    let err = (total / std::f64::consts::PI - 1.0).abs();
    ensure(err <= 0.05, || format!("semicircle curvature sum {total}"))?;
    Ok(format!("collinear k_c = 0; counts within [{lo}, {hi}] on 1000 paths; semicircle sum off by {:.2}%", 100.0 * err))
}

fn draw(m: &GaussianMixture, n: usize, r: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<f64>> {
    let l: Vec<DMatrix<f64>> = m.covariances.iter().map(|c| c.clone().cholesky().unwrap().l()).collect();
    (0..n)
        .map(|_| {
            let u: f64 = r.random();
            let k = if u < m.weights[0] { 0 } else { m.n_components() - 1 };
            let z = DVector::from_fn(m.dim(), |_, _| StandardNormal.sample(r));
            (&m.means[k] + &l[k] * z).iter().copied().collect()
        })
        .collect()
}

fn monotone(ll: &[f64]) -> bool {
    ll.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0))
}

fn gmm() -> Check {
    let mut r = rng(107);
    let mut fits = 0;
    for seed in 0..6 {
        let truth = random_mixture(&mut r, 2, 3);
        let data = draw(&truth, 300, &mut r);
        for k in [1, 2, 4] {
            let (_, report) = gmm_fit(&data, k, seed).unwrap();
            ensure(monotone(&report.log_likelihood), || format!("objective decreased (seed {seed}, K = {k})"))?;
            fits += 1;
        }
    }
    let sigma = 0.5;
    let truth = GaussianMixture {
        weights: vec![0.35, 0.65],
        means: vec![DVector::from_vec(vec![-2.0, 1.0]), DVector::from_vec(vec![2.0, -1.0])],
        covariances: vec![DMatrix::identity(2, 2) * sigma * sigma; 2],
    };
    let data = draw(&truth, 2000, &mut r);
    let (fit, report) = gmm_fit(&data, 2, 1).unwrap();
    ensure(monotone(&report.log_likelihood), || "objective decreased on the two-cluster fit".into())?;
    fits += 1;
    let order = if fit.means[0][0] < fit.means[1][0] { [0, 1] } else { [1, 0] };
    let mut mean_err: f64 = 0.0;
    let mut weight_err: f64 = 0.0;
    for (t, &f) in order.iter().enumerate() {
        mean_err = mean_err.max((&fit.means[f] - &truth.means[t]).norm() / sigma);
        weight_err = weight_err.max((fit.weights[f] - truth.weights[t]).abs());
    }
    ensure(mean_err < 0.5 && weight_err < 0.05, || format!("recovery: mean {mean_err} σ, weight {weight_err}"))?;
    for case in 0..50 {
        let model = GaussianMixtureModel::new(random_mixture(&mut r, 3, 12), 2, 2, 0.1).unwrap();
        let obs: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let cond = gmm_condition(&model, &obs).unwrap();
        for (prior, post) in model.mixture.covariances.iter().zip(&cond.covariances) {
            let diff = prior.view((6, 6), (6, 6)).into_owned() - post;
            let min_eig = ((&diff + diff.transpose()) * 0.5).symmetric_eigenvalues().min();
            ensure(min_eig >= -1e-9 * prior.norm(), || format!("model {case}: ordering fails, λ_min {min_eig:e}"))?;
        }
    }
    Ok(format!(
        "{fits} monotone fits; recovery within {mean_err:.3} σ and {weight_err:.3} weight; PSD ordering on 50 models"
    ))
}

fn selection_rule() -> Check {
    let cfg = SelectionConfig::default();
    let e = |likelihood: f64, t_goal: f64| SelectionEntry {
        likelihood,
        t_goal,
        alpha_feasible: true,
        deviation: 0.1,
        within_limits: true,
    };
    ensure(select_plan(&[e(0.5, 2.0), e(0.5, 1.0)], &cfg) == Some((1, false)), || "min-T example".into())?;
    let far = SelectionEntry { deviation: 0.6, ..e(1.0, 0.5) };
    ensure(select_plan(&[far, e(1.0, 2.0)], &cfg) == Some((1, false)), || "δ_max example".into())?;
    let late = |t| SelectionEntry { alpha_feasible: false, ..e(1.0, t) };
    ensure(select_plan(&[late(1.0), late(2.5), late(2.0)], &cfg) == Some((1, true)), || "fallback example".into())?;
    let mut r = rng(108);
    for case in 0..500 {
        let n = r.random_range(1..15);
        let entries: Vec<SelectionEntry> = (0..n)
            .map(|_| SelectionEntry {
                likelihood: r.random_range(0.0..3.0),
                t_goal: 0.1 * r.random_range(1..30) as f64,
                alpha_feasible: r.random_bool(0.6),
                deviation: r.random_range(0.0..0.8),
                within_limits: r.random_bool(0.8),
            })
            .collect();
        let shift = r.random_range(-50.0..50.0);
        let shifted: Vec<SelectionEntry> =
            entries.iter().map(|x| SelectionEntry { likelihood: x.likelihood + shift, ..*x }).collect();
        ensure(select_plan(&entries, &cfg) == select_plan(&shifted, &cfg), || format!("shift changes case {case}"))?;
    }
    Ok("three examples pass; selection unchanged under likelihood shifts on 500 cases".into())
}

fn fit_desk_gmm() -> Result<Arc<ConditionalPredictor>, String> {
    let sc = DeskEnvironment::EmptyRoom.scenario(1.0, 0.5);
    let grid = OccupancyGrid::from_spec(sc.grid.clone()).map_err(|e| e.to_string())?;
    let pred = sc.planner.prediction;
    let data = generate_training_set(&grid, 100, &pred, &TrainingConfig::default(), 0).map_err(|e| e.to_string())?;
    let (mixture, _) = gmm_fit_with(&data, &GmmFitOptions::default()).map_err(|e| e.to_string())?;
    let model = GaussianMixtureModel::new(mixture, pred.n_obs, pred.n_pred, pred.dt).map_err(|e| e.to_string())?;
    Ok(Arc::new(ConditionalPredictor::new(&model).map_err(|e| e.to_string())?))
}

fn end_to_end() -> Check {
    let t0 = Instant::now();
    let mut sc = DeskEnvironment::EmptyRoom.scenario(1.0, 0.5);
    let rate = |sc: &intercept_core::sim::Scenario, predictor: Option<Predictor>| -> Result<usize, String> {
        let mut res = sc.resources().map_err(|e| e.to_string())?;
        if let Some(p) = predictor {
            res.predictor = p;
        }
        let mut ok = 0;
        for seed in 0..10 {
            if run_scenario_with(sc, &res, seed).map_err(|e| e.to_string())?.success {
                ok += 1;
            }
        }
        Ok(ok)
    };
    let gt = rate(&sc, None)?;
    sc.predictor = PredictorChoice::NoPrediction;
    let none = rate(&sc, None)?;
    let gmm = rate(&sc, Some(Predictor::Gmm(fit_desk_gmm()?)))?;
    let secs = t0.elapsed().as_secs_f64();
    ensure(gt == 10, || format!("ground truth {gt}/10"))?;
    ensure(gmm >= none, || format!("GMM {gmm}/10 below no prediction {none}/10"))?;
    ensure(secs < 300.0, || format!("took {secs:.0} s"))?;
    Ok(format!("ground truth {gt}/10, GMM {gmm}/10, no prediction {none}/10 in {secs:.0} s"))
}

fn policy_ordering() -> Check {
    let speeds = [0.5, 1.0, 1.5, 2.0, 2.5];
    let delays = [0.5, 1.5];
    let seeds = [0, 1, 2];
    let mut sc = DeskEnvironment::EmptyRoom.scenario(1.0, 0.5);
    let opt = run_sweep_with(&sc, &sc.resources().unwrap(), &speeds, &delays, &seeds).map_err(|e| e.to_string())?;
    sc.policy = PolicyChoice::Baseline { v_max: 2.5 };
    let base = run_sweep_with(&sc, &sc.resources().unwrap(), &speeds, &delays, &seeds).map_err(|e| e.to_string())?;
    let per_speed: Vec<(f64, f64)> = speeds.iter().map(|&s| (opt.rate_at_speed(s), base.rate_at_speed(s))).collect();
    let detail = per_speed.iter().zip(&speeds).map(|((o, b), s)| format!("{s}: {o:.2}/{b:.2}")).collect::<Vec<_>>().join(", ");
    ensure(opt.success_rate >= base.success_rate, || format!("optimizer {} < baseline {}", opt.success_rate, base.success_rate))?;
    ensure(per_speed.iter().any(|(o, b)| o > b), || format!("no speed cell strictly better ({detail})"))?;
    Ok(format!(
        "optimizer {:.2} vs baseline {:.2} overall; optimizer/baseline per speed {detail}",
        opt.success_rate, base.success_rate
    ))
}

fn compute_budget() -> Check {
    let mut sc = DeskEnvironment::EmptyRoom.scenario(1.0, 0.5);
    sc.predictor = PredictorChoice::Noisy;
    let res = sc.resources().unwrap();
    let mut cycles = Vec::new();
    let mut split = [0.0; 3];
    for seed in 0..3 {
        let r = run_scenario_with(&sc, &res, seed).map_err(|e| e.to_string())?;
        cycles.extend(r.cycle_ms.iter().copied());
        for s in &r.cycle_split_ms {
            for i in 0..3 {
                split[i] += s[i];
            }
        }
    }
    ensure(!cycles.is_empty(), || "no planning cycles ran".into())?;
    let n = cycles.len() as f64;
    cycles.sort_by(f64::total_cmp);
    let median = cycles[cycles.len() / 2];
    ensure(median < 100.0, || format!("median cycle {median:.1} ms"))?;
    Ok(format!(
        "median {median:.1} ms over {} cycles (≤ {} candidates, ≤ {} waypoints); mean split prediction {:.1} / A* {:.1} / optimisation {:.1} ms",
        cycles.len(),
        sc.planner.selection.max_candidates,
        sc.planner.waypoints.max_waypoints,
        split[0] / n,
        split[1] / n,
        split[2] / n
    ))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut sc = DeskEnvironment::PillaredRoom.scenario(1.5, 0.5);
    sc.predictor = PredictorChoice::Noisy;
    let sc_path = dir.path().join("scenario.json");
    std::fs::write(&sc_path, sc.to_json().unwrap()).map_err(|e| e.to_string())?;
    let run = |out: &str| {
        execute(Command::Run(RunArgs {
            scenario: sc_path.clone(),
            seed: 11,
            out: dir.path().join(out),
            budget_ms: 100.0,
        }))
        .map_err(|e| e.to_string())
    };
    run("a")?;
    run("b")?;
    execute(Command::Replay(intercept_core::cli::ReplayArgs {
        manifest: dir.path().join("a/manifest.json"),
        out: Some(dir.path().join("c")),
    }))
    .map_err(|e| e.to_string())?;
    let read = |p: std::path::PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    for f in ["result.json", "trace.csv", "target.json"] {
        let a = read(dir.path().join("a").join(f))?;
        ensure(a == read(dir.path().join("b").join(f))?, || format!("{f} differs between runs"))?;
        ensure(a == read(dir.path().join("c").join(f))?, || format!("{f} differs after replay"))?;
    }
    let sweep = |out: &str| {
        execute(Command::Sweep(SweepArgs {
            scenario: sc_path.clone(),
            speeds: vec![1.0, 2.0],
            delays: vec![0.5],
            seeds: 1,
            seed: 3,
            out: dir.path().join(out),
            jobs: 0,
            budget_ms: 100.0,
        }))
        .map_err(|e| e.to_string())
    };
    sweep("s1")?;
    sweep("s2")?;
    for f in ["sweep.csv", "sweep.json"] {
        ensure(read(dir.path().join("s1").join(f))? == read(dir.path().join("s2").join(f))?, || {
            format!("{f} differs between sweeps")
        })?;
    }
    Ok("run, replay and sweep outputs byte-identical".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("scaling invariance", scaling_invariance),
        ("snap-cost scaling law", snap_cost_law),
        ("QP correctness", qp_correctness),
        ("iterative adaptation", adaptation),
        ("A* validity", astar_validity),
        ("waypoint selection", waypoint_selection),
        ("GMM", gmm),
        ("selection rule", selection_rule),
        ("end-to-end interception", end_to_end),
        ("policy ordering", policy_ordering),
        ("compute budget", compute_budget),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
