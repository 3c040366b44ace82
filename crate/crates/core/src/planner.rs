//! One replanning cycle: predict goal candidates, search the grid towards all
//! of them at once, fit and re-time a trajectory per reachable candidate and
//! pick the best reachable one.

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::error::{domain, Error, Result};
use crate::feasibility::check_feasibility;
use crate::gridplan::{multi_resolution_astar, shortcut_path, GridPath, OccupancyGrid, ResolutionSchedule};
use crate::minsnap::solve_qp_detailed;
use crate::policy::{adapt_with, AdaptationConfig, AdaptationResult, TimeAllocationPolicy};
use crate::predict::{GoalCandidate, PredictionConfig, Predictor};
use crate::trajectory::PiecewisePolynomialTrajectory;
use crate::types::{BoundaryState, DynamicLimits, TimeAllocation, Vec3};
use crate::waypoints::{select_waypoints, WaypointSelectionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Largest allowed deviation from the lattice path (m).
    pub delta_max: f64,
    /// Weight of the normalised likelihood against arrival time in the score.
    pub likelihood_weight: f64,
    /// Candidates kept per cycle, spread over the prediction steps.
    pub max_candidates: usize,
    pub deviation_samples: usize,
    /// Evaluate every candidate instead of stopping at the first feasible one
    /// in score order. Both give the same selection.
    pub exhaustive: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            delta_max: 0.5,
            likelihood_weight: 1.0,
            max_candidates: 60,
            deviation_samples: 50,
            exhaustive: false,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_max.is_finite() && self.delta_max > 0.0) {
            return Err(domain("delta_max must be positive"));
        }
        if !(self.likelihood_weight.is_finite() && self.likelihood_weight >= 0.0) {
            return Err(domain("likelihood weight must be non-negative"));
        }
        if self.max_candidates == 0 || self.deviation_samples < 2 {
            return Err(domain("need at least one candidate and two deviation samples"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub prediction: PredictionConfig,
    pub selection: SelectionConfig,
    pub waypoints: WaypointSelectionConfig,
    pub adaptation: AdaptationConfig,
    /// Limits checked on every candidate trajectory.
    pub limits: DynamicLimits,
    /// Coarsen the search lattice with distance from the start.
    pub multi_resolution: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            prediction: PredictionConfig::default(),
            selection: SelectionConfig::default(),
            waypoints: WaypointSelectionConfig::default(),
            adaptation: AdaptationConfig {
                stop_when_unreachable: true,
                ..Default::default()
            },
            limits: DynamicLimits::default(),
            multi_resolution: true,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.prediction.validate()?;
        self.selection.validate()?;
        self.waypoints.validate()?;
        self.limits.validate()?;
        if !(self.adaptation.tolerance > 0.0) || self.adaptation.max_iterations == 0 {
            return Err(domain("adaptation needs a positive tolerance and iteration budget"));
        }
        Ok(())
    }
}

/// Pose and derivative state of the interceptor at the start of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec3,
    pub yaw: f64,
    pub boundary: BoundaryState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePlan {
    /// Index into the cycle's candidate list.
    pub index: usize,
    pub candidate: GoalCandidate,
    pub grid_path: GridPath,
    pub waypoints: crate::types::WaypointSequence,
    pub adaptation: AdaptationResult,
    pub trajectory: PiecewisePolynomialTrajectory,
    pub deviation: f64,
    pub normalized_likelihood: f64,
    pub score: f64,
    pub within_limits: bool,
    /// Reachable in time, close to its lattice path and within limits.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleTiming {
    pub prediction_ms: f64,
    pub search_ms: f64,
    pub optimization_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    pub candidates: Vec<GoalCandidate>,
    /// Evaluated candidates in candidate-index order.
    pub plans: Vec<CandidatePlan>,
    /// Position of the chosen plan in `plans`.
    pub selected: usize,
    /// True when nothing was feasible and the longest-horizon candidate was
    /// taken instead.
    pub fallback: bool,
    pub unreachable: usize,
    /// Reachable candidates dropped for needing more than the speed limit.
    pub too_fast: usize,
    /// Reachable candidates never evaluated because a better-scored one was
    /// already feasible.
    pub skipped: usize,
    /// Candidates whose waypoint extraction or QP failed.
    pub failed: usize,
    /// Timings vary between runs and are left out of serialised results.
    #[serde(skip)]
    pub timing: CycleTiming,
}

impl CycleResult {
    pub fn selected_plan(&self) -> &CandidatePlan {
        &self.plans[self.selected]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Arc-length samples of a polyline at `n` evenly spaced fractions.
fn polyline_samples(points: &[Vec3], n: usize) -> Vec<Vec3> {
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    (0..n)
        .map(|i| {
            let s = total * i as f64 / (n - 1) as f64;
            if total <= 0.0 {
                return points[0];
            }
            let j = cum.partition_point(|c| *c < s).clamp(1, points.len() - 1);
            let seg = cum[j] - cum[j - 1];
            let u = if seg > 0.0 { ((s - cum[j - 1]) / seg).clamp(0.0, 1.0) } else { 0.0 };
            points[j - 1] + (points[j] - points[j - 1]) * u
        })
        .collect()
}

/// Largest distance between corresponding points of the trajectory and the
/// lattice path, both sampled at `n` evenly spaced arc-length fractions.
pub fn path_deviation(traj: &PiecewisePolynomialTrajectory, path: &GridPath, n: usize) -> f64 {
    let n = n.max(2);
    let dense: Vec<Vec3> = traj.sample_uniform((20 * n).max(400)).into_iter().map(|s| s.1).collect();
    let a = polyline_samples(&dense, n);
    let b = polyline_samples(&path.points, n);
    a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Scores and feasibility of one evaluated candidate, for [`select_plan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionEntry {
    pub likelihood: f64,
    pub t_goal: f64,
    pub alpha_feasible: bool,
    pub deviation: f64,
    pub within_limits: bool,
}

/// Min-max normalisation to `[0, 1]`; all ones when the values coincide.
pub fn normalize_likelihoods(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Candidate order for selection: higher score, then earlier arrival, then
/// lower index.
fn rank(scores: &[f64], t_goal: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(t_goal[a].total_cmp(&t_goal[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Longest arrival time, lowest index on ties.
fn fallback_index(t_goal: &[f64]) -> Option<usize> {
    (0..t_goal.len()).fold(None, |best: Option<usize>, i| match best {
        Some(b) if t_goal[b] >= t_goal[i] => Some(b),
        _ => Some(i),
    })
}

/// Best feasible entry by `w · normalised likelihood − T_goal`; if none is
/// feasible, the entry with the longest `T_goal`, flagged as a fallback.
pub fn select_plan(entries: &[SelectionEntry], config: &SelectionConfig) -> Option<(usize, bool)> {
    let norm = normalize_likelihoods(&entries.iter().map(|e| e.likelihood).collect::<Vec<_>>());
    let scores: Vec<f64> = entries
        .iter()
        .zip(&norm)
        .map(|(e, n)| config.likelihood_weight * n - e.t_goal)
        .collect();
    let t: Vec<f64> = entries.iter().map(|e| e.t_goal).collect();
    let feasible = |e: &SelectionEntry| e.alpha_feasible && e.deviation < config.delta_max && e.within_limits;
    if let Some(&i) = rank(&scores, &t).iter().find(|&&i| feasible(&entries[i])) {
        return Some((i, false));
    }
    fallback_index(&t).map(|i| (i, true))
}

/// At most `cap` candidates, taken round-robin over prediction steps with the
/// most likely first within each step; original order is kept.
pub fn limit_candidates(candidates: &[GoalCandidate], cap: usize) -> Vec<usize> {
    if candidates.len() <= cap {
        return (0..candidates.len()).collect();
    }
    let mut steps: Vec<usize> = candidates.iter().map(|c| c.step).collect();
    steps.sort_unstable();
    steps.dedup();
    let mut buckets: Vec<Vec<usize>> = steps
        .iter()
        .map(|s| {
            let mut b: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].step == *s).collect();
            b.sort_by(|&x, &y| candidates[y].likelihood.total_cmp(&candidates[x].likelihood).then(x.cmp(&y)));
            b.reverse();
            b
        })
        .collect();
    let mut keep = Vec::with_capacity(cap);
    while keep.len() < cap {
        for b in &mut buckets {
            if keep.len() == cap {
                break;
            }
            if let Some(i) = b.pop() {
                keep.push(i);
            }
        }
    }
    keep.sort_unstable();
    keep
}

/// Shared read-only inputs of a cycle.
pub struct Planner<'a> {
    pub grid: &'a OccupancyGrid,
    pub policy: &'a dyn TimeAllocationPolicy,
    pub config: &'a PlannerConfig,
}

struct Reachable {
    index: usize,
    path: GridPath,
    norm: f64,
    score: f64,
}

impl<'a> Planner<'a> {
    pub fn new(grid: &'a OccupancyGrid, policy: &'a dyn TimeAllocationPolicy, config: &'a PlannerConfig) -> Self {
        Self { grid, policy, config }
    }

    /// Full cycle with candidates from `predictor`.
    pub fn plan_cycle(
        &self,
        predictor: &Predictor,
        state: &VehicleState,
        target: &PiecewisePolynomialTrajectory,
        t_now: f64,
        seed: u64,
    ) -> Result<CycleResult> {
        let watch = Stopwatch::start();
        let candidates = predictor.predict(target, t_now, &self.config.prediction, self.grid, seed)?;
        let prediction_ms = watch.elapsed_ms();
        let mut out = self.plan_candidates(state, candidates)?;
        out.timing.prediction_ms = prediction_ms;
        out.timing.total_ms = watch.elapsed_ms();
        Ok(out)
    }

    /// Everything after prediction.
    pub fn plan_candidates(&self, state: &VehicleState, candidates: Vec<GoalCandidate>) -> Result<CycleResult> {
        self.config.validate()?;
        if candidates.is_empty() {
            return Err(Error::HoldPosition);
        }
        if !self.grid.is_free(&state.position) {
            return Err(domain("vehicle position is not in free space"));
        }
        let sel = &self.config.selection;
        let kept = limit_candidates(&candidates, sel.max_candidates);

        let watch = Stopwatch::start();
        let goals: Vec<Vec3> = kept.iter().map(|&i| candidates[i].position).collect();
        let schedule = if self.config.multi_resolution {
            ResolutionSchedule::DistanceBased {
                room_diagonal: self.grid.diagonal(),
            }
        } else {
            ResolutionSchedule::Fixed
        };
        let paths = multi_resolution_astar(self.grid, state.position, &goals, schedule)?;
        let search_ms = watch.elapsed_ms();

        let mut reach: Vec<Reachable> = kept
            .iter()
            .zip(paths)
            .filter_map(|(&i, p)| p.map(|path| (i, shortcut_path(self.grid, &path))))
            .map(|(index, path)| Reachable {
                index,
                path,
                norm: 0.0,
                score: 0.0,
            })
            .collect();
        let unreachable = kept.len() - reach.len();
        if reach.is_empty() {
            return Err(Error::HoldPosition);
        }
        let norm = normalize_likelihoods(&reach.iter().map(|r| candidates[r.index].likelihood).collect::<Vec<_>>());
        for (r, n) in reach.iter_mut().zip(norm) {
            r.norm = n;
            r.score = sel.likelihood_weight * n - candidates[r.index].t_goal;
        }

        let watch = Stopwatch::start();
        let scores: Vec<f64> = reach.iter().map(|r| r.score).collect();
        let t: Vec<f64> = reach.iter().map(|r| candidates[r.index].t_goal).collect();
        // A candidate whose straight-line distance needs more than the speed
        // limit in the time available can never pass the limit check.
        let v_max = self.config.limits.max_speed;
        let (order, pruned): (Vec<usize>, Vec<usize>) = rank(&scores, &t).into_iter().partition(|&k| {
            let c = &candidates[reach[k].index];
            c.t_goal * SPEED_SLACK >= (c.position - state.position).norm() / v_max
        });
        let mut plans: Vec<Option<CandidatePlan>> = vec![None; reach.len()];
        let mut failed = vec![false; reach.len()];
        let mut chosen = None;
        for batch in order.chunks(batch_size()) {
            let done = self.evaluate_batch(state, &candidates, &reach, batch);
            for (&k, plan) in batch.iter().zip(done) {
                match plan {
                    Ok(p) => plans[k] = Some(p),
                    Err(e) => {
                        log::debug!("candidate {} dropped: {e}", reach[k].index);
                        failed[k] = true;
                    }
                }
            }
            if chosen.is_none() {
                chosen = batch.iter().copied().find(|&k| plans[k].as_ref().is_some_and(|p| p.feasible));
            }
            if chosen.is_some() && !sel.exhaustive {
                break;
            }
        }
        let fallback = chosen.is_none();
        let pick = match chosen {
            Some(k) => k,
            None => {
                let mut by_horizon: Vec<usize> = (0..reach.len()).collect();
                by_horizon.sort_by(|&a, &b| t[b].total_cmp(&t[a]).then(a.cmp(&b)));
                let mut pick = None;
                for k in by_horizon {
                    if failed[k] {
                        continue;
                    }
                    if plans[k].is_none() {
                        match self.evaluate(state, &candidates, &reach[k]) {
                            Ok(p) => plans[k] = Some(p),
                            Err(e) => {
                                log::debug!("candidate {} dropped: {e}", reach[k].index);
                                failed[k] = true;
                                continue;
                            }
                        }
                    }
                    pick = Some(k);
                    break;
                }
                pick.ok_or(Error::HoldPosition)?
            }
        };
        if fallback {
            let p = plans[pick].as_mut().unwrap();
            if p.adaptation.alpha_goal < 1.0 {
                // Fly the unstretched policy answer rather than an over-fast one.
                let alloc = p.adaptation.allocation.scaled(1.0 / p.adaptation.alpha_goal)?;
                self.retime(state, p, alloc)?;
            }
        }
        let optimization_ms = watch.elapsed_ms();

        let skipped = order.iter().filter(|&&k| plans[k].is_none() && !failed[k]).count();
        let mut evaluated: Vec<CandidatePlan> = plans.into_iter().flatten().collect();
        evaluated.sort_by_key(|p| p.index);
        let selected = evaluated.iter().position(|p| p.index == reach[pick].index).unwrap();
        Ok(CycleResult {
            candidates,
            plans: evaluated,
            selected,
            fallback,
            unreachable,
            too_fast: pruned.len(),
            skipped,
            failed: failed.iter().filter(|f| **f).count(),
            timing: CycleTiming {
                prediction_ms: 0.0,
                search_ms,
                optimization_ms,
                total_ms: search_ms + optimization_ms,
            },
        })
    }

    #[cfg(feature = "native")]
    fn evaluate_batch(
        &self,
        state: &VehicleState,
        candidates: &[GoalCandidate],
        reach: &[Reachable],
        batch: &[usize],
    ) -> Vec<Result<CandidatePlan>> {
        use rayon::prelude::*;
        batch.par_iter().map(|&k| self.evaluate(state, candidates, &reach[k])).collect()
    }

    #[cfg(not(feature = "native"))]
    fn evaluate_batch(
        &self,
        state: &VehicleState,
        candidates: &[GoalCandidate],
        reach: &[Reachable],
        batch: &[usize],
    ) -> Vec<Result<CandidatePlan>> {
        batch.iter().map(|&k| self.evaluate(state, candidates, &reach[k])).collect()
    }

    fn evaluate(&self, state: &VehicleState, candidates: &[GoalCandidate], r: &Reachable) -> Result<CandidatePlan> {
        let c = &candidates[r.index];
        let waypoints = select_waypoints(&r.path, &self.config.waypoints, state.position, state.yaw, c.position)?;
        let mut plan = CandidatePlan {
            index: r.index,
            candidate: c.clone(),
            grid_path: r.path.clone(),
            waypoints,
            adaptation: AdaptationResult {
                alpha_goal: 0.0,
                allocation: TimeAllocation::new(vec![1.0])?,
                feasible: false,
                iterations: 0,
                converged: false,
            },
            trajectory: PiecewisePolynomialTrajectory::hover(state.position, state.yaw, 1.0)?,
            deviation: 0.0,
            normalized_likelihood: r.norm,
            score: r.score,
            within_limits: false,
            feasible: false,
        };
        let adaptation = adapt_with(self.policy, &plan.waypoints, &state.boundary, c.t_goal, &self.config.adaptation)?;
        let alloc = adaptation.allocation.clone();
        plan.adaptation = adaptation;
        self.retime(state, &mut plan, alloc)?;
        Ok(plan)
    }

    /// Solve the QP for `alloc` and refresh the derived checks.
    fn retime(&self, state: &VehicleState, plan: &mut CandidatePlan, alloc: TimeAllocation) -> Result<()> {
        let sol = solve_qp_detailed(&plan.waypoints, &state.boundary, alloc.durations())?;
        plan.trajectory = sol.trajectory;
        plan.deviation = path_deviation(&plan.trajectory, &plan.grid_path, self.config.selection.deviation_samples);
        plan.within_limits = check_feasibility(&plan.trajectory, &self.config.limits);
        plan.feasible = plan.adaptation.feasible
            && plan.adaptation.converged
            && plan.within_limits
            && plan.deviation < self.config.selection.delta_max;
        Ok(())
    }
}

/// Sampled limit checks can miss a peak by a little; prune only clear cases.
const SPEED_SLACK: f64 = 1.05;

#[cfg(feature = "native")]
fn batch_size() -> usize {
    rayon::current_num_threads().max(1)
}

#[cfg(not(feature = "native"))]
fn batch_size() -> usize {
    1
}
