//! Outer level of the bi-level problem: choose segment durations minimising
//! `ρ Σx + σ(χ(x))` over dynamically feasible QP solutions.
//!
//! The search runs in log-duration space so positivity is automatic:
//! a uniform-scale line search from the distance/velocity heuristic, a
//! coordinate-wise pattern search, a Nelder–Mead refinement, a final uniform
//! rescale and a ±1% coordinate polish.

use crate::error::{domain, Error, Result};
use crate::feasibility::peak_magnitudes;
use crate::minsnap::qp::solve_qp_detailed;
use crate::types::{BoundaryState, DynamicLimits, SnapCostWeights, TimeAllocation, WaypointSequence};

/// Shortest duration any segment may take.
const MIN_DURATION: f64 = 1e-3;
const MAX_DURATION: f64 = 1e4;
/// Multiplicative probe used by the final polish (±1%).
const PROBE_UP: f64 = 1.01;
const PROBE_DOWN: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeOptimizerOptions {
    /// Upper bound on QP + cost evaluations per call.
    pub max_evaluations: usize,
    /// Heuristic cruise speed as a fraction of the speed limit.
    pub heuristic_speed_fraction: f64,
    /// Log-space tolerance of the uniform-scale line search.
    pub line_tolerance: f64,
}

impl Default for TimeOptimizerOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 200,
            heuristic_speed_fraction: 0.5,
            line_tolerance: 1e-4,
        }
    }
}

/// One evaluated allocation.
#[derive(Debug, Clone)]
struct Probe {
    x: Vec<f64>,
    cost: f64,
    /// Worst limit ratio; feasible iff `≤ 1`.
    violation: f64,
}

impl Probe {
    fn feasible(&self) -> bool {
        self.violation <= 1.0
    }

    /// Search objective: cost if feasible, `+∞` otherwise.
    fn objective(&self) -> f64 {
        if self.feasible() {
            self.cost
        } else {
            f64::INFINITY
        }
    }
}

struct Search<'a> {
    waypoints: &'a WaypointSequence,
    boundary: &'a BoundaryState,
    weights: &'a SnapCostWeights,
    limits: &'a DynamicLimits,
    evaluations: usize,
    budget: usize,
    best: Option<Probe>,
    least_violation: Option<Probe>,
}

impl Search<'_> {
    fn remaining(&self) -> usize {
        self.budget.saturating_sub(self.evaluations)
    }

    /// Evaluate `x`; `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Option<Probe> {
        if self.remaining() == 0 {
            return None;
        }
        self.evaluations += 1;
        let x: Vec<f64> = x.iter().map(|d| d.clamp(MIN_DURATION, MAX_DURATION)).collect();
        let probe = match solve_qp_detailed(self.waypoints, self.boundary, &x) {
            Ok(sol) => {
                let peak = peak_magnitudes(&sol.trajectory);
                Probe {
                    cost: self.weights.rho * x.iter().sum::<f64>() + sol.smoothness_cost(self.weights),
                    violation: peak.worst_ratio(self.limits),
                    x,
                }
            }
            Err(_) => Probe {
                x,
                cost: f64::INFINITY,
                violation: f64::INFINITY,
            },
        };
        if probe.feasible() && self.best.as_ref().is_none_or(|b| probe.cost < b.cost) {
            self.best = Some(probe.clone());
        }
        if self.least_violation.as_ref().is_none_or(|b| probe.violation < b.violation) {
            self.least_violation = Some(probe.clone());
        }
        Some(probe)
    }

    fn eval_scaled(&mut self, shape: &[f64], log_scale: f64) -> Option<Probe> {
        let s = log_scale.exp();
        let x: Vec<f64> = shape.iter().map(|d| d * s).collect();
        self.eval(&x)
    }

    /// Log-scale at which `shape` becomes feasible. Too short violates the
    /// limits, and so does too long when the boundary acceleration is nonzero,
    /// so this minimises the violation ratio and stops at the first feasible
    /// point.
    fn feasible_scale(&mut self, shape: &[f64], step: f64, tol: f64) -> Option<f64> {
        let v = |s: &mut Self, u: f64| s.eval_scaled(shape, u).map(|p| p.violation);
        let v0 = v(self, 0.0)?;
        if v0 <= 1.0 {
            return Some(0.0);
        }
        let vr = v(self, step)?;
        if vr <= 1.0 {
            return Some(step);
        }
        let (dir, mut m, mut vm) = if vr < v0 {
            (1.0, step, vr)
        } else {
            let vl = v(self, -step)?;
            if vl <= 1.0 {
                return Some(-step);
            }
            if vl < v0 {
                (-1.0, -step, vl)
            } else {
                // Minimum lies within one step of zero.
                return self.golden_violation(shape, -step, step, tol);
            }
        };
        let mut prev = 0.0;
        let mut st = step;
        loop {
            st *= 1.6;
            let next = m + dir * st;
            if next.abs() > 40.0 {
                return None;
            }
            let vn = v(self, next)?;
            if vn <= 1.0 {
                return Some(next);
            }
            if vn >= vm {
                let (a, b) = if dir > 0.0 { (prev, next) } else { (next, prev) };
                return self.golden_violation(shape, a, b, tol);
            }
            prev = m;
            m = next;
            vm = vn;
        }
    }

    fn golden_violation(&mut self, shape: &[f64], mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let v = |s: &mut Self, u: f64| s.eval_scaled(shape, u).map(|p| p.violation);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut vc = v(self, c)?;
        let mut vd = v(self, d)?;
        while b - a > tol {
            if vc <= 1.0 {
                return Some(c);
            }
            if vd <= 1.0 {
                return Some(d);
            }
            if vc <= vd {
                b = d;
                d = c;
                vd = vc;
                c = b - g * (b - a);
                vc = v(self, c)?;
            } else {
                a = c;
                c = d;
                vc = vd;
                d = a + g * (b - a);
                vd = v(self, d)?;
            }
        }
        None
    }

    /// Quasi-convex line search over a uniform scale of `shape`. Infeasible
    /// scales count as `+∞`, so the minimiser is either interior or on the
    /// feasibility boundary.
    fn uniform_scale(&mut self, shape: &[f64], initial_step: f64, tol: f64) -> Option<Probe> {
        let f = |s: &mut Self, u: f64| s.eval_scaled(shape, u).map(|p| p.objective());
        let u0 = self.feasible_scale(shape, initial_step, tol)?;
        let f0 = f(self, u0)?;
        // Bracket the minimiser around u0.
        let step0 = initial_step;
        let (mut a, mut b);
        let fl = f(self, u0 - step0)?;
        if fl < f0 {
            // Decreasing to the left.
            let (mut m, mut fm) = (u0 - step0, fl);
            let mut right = u0;
            let mut st = step0;
            loop {
                let l = m - st;
                let fl = f(self, l)?;
                if fl >= fm {
                    a = l;
                    b = right;
                    break;
                }
                right = m;
                m = l;
                fm = fl;
                st *= 1.6;
                if m < -40.0 {
                    a = l;
                    b = right;
                    break;
                }
            }
        } else {
            let fr = f(self, u0 + step0)?;
            if fr < f0 {
                let (mut m, mut fm) = (u0 + step0, fr);
                let mut left = u0;
                let mut st = step0;
                loop {
                    let r = m + st;
                    let fr = f(self, r)?;
                    if fr >= fm {
                        a = left;
                        b = r;
                        break;
                    }
                    left = m;
                    m = r;
                    fm = fr;
                    st *= 1.6;
                    if m > 40.0 {
                        a = left;
                        b = r;
                        break;
                    }
                }
            } else {
                a = u0 - step0;
                b = u0 + step0;
            }
        }
        // Golden-section refinement.
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = f(self, c)?;
        let mut fd = f(self, d)?;
        while (b - a) > tol {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(self, c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(self, d)?;
            }
        }
        // Prefer the feasible end of the final bracket.
        let candidates = [(fc, c), (fd, d), (f(self, b)?, b)];
        let (fbest, ubest) = candidates
            .iter()
            .cloned()
            .fold((f64::INFINITY, 0.0), |acc, v| if v.0 < acc.0 { v } else { acc });
        if fbest.is_infinite() {
            return None;
        }
        self.eval_scaled(shape, ubest)
    }

    /// Coordinate-wise multiplicative pattern search; returns the improved point.
    fn coordinate_search(&mut self, start: Probe, steps: &[f64]) -> Probe {
        let mut cur = start;
        for &step in steps {
            loop {
                let mut improved = false;
                for i in 0..cur.x.len() {
                    for factor in [step.exp(), (-step).exp()] {
                        let mut x = cur.x.clone();
                        x[i] *= factor;
                        let Some(p) = self.eval(&x) else { return cur };
                        if p.objective() < cur.objective() {
                            cur = p;
                            improved = true;
                            break;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        cur
    }

    /// Coordinate search on the violation ratio from the least-violating
    /// probe so far, stopping at the first feasible point. Uniform stretching
    /// cannot help when the boundary state itself drives the excess (the
    /// first segment usually needs a different share than the rest).
    fn restore_feasibility(&mut self, steps: &[f64], stop_at: usize) -> Option<Probe> {
        let mut cur = self.least_violation.clone()?;
        for &step in steps {
            loop {
                let mut improved = false;
                for i in 0..cur.x.len() {
                    for factor in [step.exp(), (-step).exp()] {
                        if self.evaluations >= stop_at {
                            return None;
                        }
                        let mut x = cur.x.clone();
                        x[i] *= factor;
                        let p = self.eval(&x)?;
                        if p.feasible() {
                            return Some(p);
                        }
                        if p.violation < cur.violation {
                            cur = p;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        None
    }

    /// ±1% polish; stops when no single-coordinate probe improves.
    fn polish(&mut self, start: Probe) -> Probe {
        let mut cur = start;
        loop {
            let mut improved = false;
            for i in 0..cur.x.len() {
                for factor in [PROBE_UP, PROBE_DOWN] {
                    let mut x = cur.x.clone();
                    x[i] *= factor;
                    let Some(p) = self.eval(&x) else { return cur };
                    if p.objective() < cur.objective() {
                        cur = p;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                return cur;
            }
        }
    }

    /// Nelder–Mead on log-durations with at most `evals` evaluations.
    fn nelder_mead(&mut self, start: Probe, size: f64, evals: usize) -> Probe {
        let n = start.x.len();
        let stop_at = (self.evaluations + evals).min(self.budget);
        let to_x = |u: &[f64]| -> Vec<f64> { u.iter().map(|v| v.exp()).collect() };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let u0: Vec<f64> = start.x.iter().map(|v| v.ln()).collect();
        simplex.push((u0.clone(), start.objective()));
        for i in 0..n {
            if self.evaluations >= stop_at {
                return start;
            }
            let mut u = u0.clone();
            u[i] += size;
            let Some(p) = self.eval(&to_x(&u)) else { return start };
            simplex.push((u, p.objective()));
        }
        let mut best = start;
        while self.evaluations + 2 <= stop_at {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let worst = simplex[n].clone();
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|s| s.0[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (worst.0[j] - centroid[j])).collect() };
            let ur = along(-1.0);
            let Some(pr) = self.eval(&to_x(&ur)) else { break };
            let fr = pr.objective();
            if fr < simplex[0].1 {
                let ue = along(-2.0);
                let Some(pe) = self.eval(&to_x(&ue)) else { break };
                let fe = pe.objective();
                simplex[n] = if fe < fr { (ue, fe) } else { (ur, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (ur, fr);
            } else {
                let uc = if fr < worst.1 { along(-0.5) } else { along(0.5) };
                let Some(pc) = self.eval(&to_x(&uc)) else { break };
                let fc = pc.objective();
                if fc < worst.1.min(fr) {
                    simplex[n] = (uc, fc);
                } else {
                    // Shrink towards the best vertex.
                    let b0 = simplex[0].0.clone();
                    for k in 1..=n {
                        if self.evaluations >= stop_at {
                            break;
                        }
                        let u: Vec<f64> = (0..n).map(|j| b0[j] + 0.5 * (simplex[k].0[j] - b0[j])).collect();
                        let Some(p) = self.eval(&to_x(&u)) else { break };
                        simplex[k] = (u, p.objective());
                    }
                }
            }
            let spread = simplex.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max)
                - simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            if spread.is_finite() && spread < 1e-9 * simplex[0].1.abs().max(1.0) {
                break;
            }
        }
        if let Some(b) = &self.best {
            if b.cost < best.objective() {
                best = b.clone();
            }
        }
        best
    }

    fn finish(self) -> Result<TimeAllocation> {
        match self.best {
            Some(b) => TimeAllocation::new(b.x),
            None => Err(Error::Infeasible {
                best: TimeAllocation::new(
                    self.least_violation
                        .map(|p| p.x)
                        .unwrap_or_else(|| vec![1.0; self.waypoints.segment_count()]),
                )?,
                evaluations: self.evaluations,
            }),
        }
    }
}

/// Distance/velocity starting guess.
pub fn heuristic_allocation(waypoints: &WaypointSequence, limits: &DynamicLimits, speed_fraction: f64) -> Vec<f64> {
    let v = limits.max_speed * speed_fraction;
    waypoints
        .segment_lengths()
        .iter()
        .map(|d| (d / v).max((2.0 * d / limits.max_accel).sqrt()).max(0.05))
        .collect()
}

/// Bi-level time allocation with default options.
pub fn optimize_time_allocation(
    waypoints: &WaypointSequence,
    boundary: &BoundaryState,
    weights: &SnapCostWeights,
    limits: &DynamicLimits,
) -> Result<TimeAllocation> {
    optimize_time_allocation_with(waypoints, boundary, weights, limits, &TimeOptimizerOptions::default(), None)
}

/// Bi-level time allocation. With a `hint` only the uniform scale of the
/// hinted allocation is optimised, so the answer varies smoothly with the
/// boundary state.
pub fn optimize_time_allocation_with(
    waypoints: &WaypointSequence,
    boundary: &BoundaryState,
    weights: &SnapCostWeights,
    limits: &DynamicLimits,
    options: &TimeOptimizerOptions,
    hint: Option<&TimeAllocation>,
) -> Result<TimeAllocation> {
    weights.validate()?;
    limits.validate()?;
    waypoints.validate()?;
    if let Some(h) = hint {
        if h.len() != waypoints.segment_count() {
            return Err(domain("hint length does not match the waypoint segments"));
        }
    }
    let mut search = Search {
        waypoints,
        boundary,
        weights,
        limits,
        evaluations: 0,
        budget: options.max_evaluations.max(1),
        best: None,
        least_violation: None,
    };
    let tol = options.line_tolerance;

    match hint {
        None => {
            let x0 = heuristic_allocation(waypoints, limits, options.heuristic_speed_fraction);
            let p = match search.uniform_scale(&x0, 0.4, tol) {
                Some(p) => p,
                None => {
                    let stop_at = search.budget * 3 / 5;
                    match search.restore_feasibility(&[0.5, 0.2, 0.07, 0.025], stop_at) {
                        Some(p) => search.uniform_scale(&p.x, 0.05, tol).unwrap_or(p),
                        None => return search.finish(),
                    }
                }
            };
            let p = search.coordinate_search(p, &[0.2, 0.07, 0.025]);
            let reserve = 4 * waypoints.segment_count() + 30;
            let nm_budget = search.remaining().saturating_sub(reserve).min(10 * waypoints.segment_count() + 10);
            let p = if nm_budget > waypoints.segment_count() + 2 {
                search.nelder_mead(p, 0.03, nm_budget)
            } else {
                p
            };
            let p = match search.uniform_scale(&p.x, 0.02, tol) {
                Some(q) if q.objective() < p.objective() => q,
                _ => p,
            };
            let p = search.polish(p);
            let _ = p;
        }
        Some(h) => {
            search.uniform_scale(h.durations(), 0.02, tol);
        }
    }
    search.finish()
}
