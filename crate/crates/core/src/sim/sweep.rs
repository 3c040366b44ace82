//! Success rates over a grid of target speeds and departure delays.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{run_scenario_with, Resources, Scenario};
use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub speed: f64,
    pub delay: f64,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean over successful runs.
    pub mean_intercept_time: Option<f64>,
    /// Largest cycle wall time over the cell's runs (ms); not serialised.
    #[serde(skip)]
    pub max_cycle_ms: f64,
    #[serde(skip)]
    pub cycle_ms: Vec<f64>,
    /// Per-cycle `[prediction, search, optimisation]` split (ms).
    #[serde(skip)]
    pub cycle_split_ms: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    pub runs: usize,
    pub success_rate: f64,
}

impl SweepTable {
    /// Mean success rate of the cells with the given speed.
    pub fn rate_at_speed(&self, speed: f64) -> f64 {
        let cells: Vec<&SweepCell> = self.cells.iter().filter(|c| (c.speed - speed).abs() < 1e-9).collect();
        let (s, n) = cells.iter().fold((0, 0), |(s, n), c| (s + c.successes, n + c.runs));
        if n == 0 {
            0.0
        } else {
            s as f64 / n as f64
        }
    }

    /// One row per cell: speed, delay, runs, successes, rate, mean intercept
    /// time and, when `with_timing`, the largest cycle time.
    #[cfg(feature = "native")]
    pub fn write_csv<W: std::io::Write>(&self, w: W, with_timing: bool) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["speed", "delay", "runs", "successes", "success_rate", "mean_intercept_time"];
        if with_timing {
            header.push("max_cycle_ms");
        }
        csv.write_record(&header).map_err(super::csv_err)?;
        for c in &self.cells {
            let mut row = vec![
                c.speed.to_string(),
                c.delay.to_string(),
                c.runs.to_string(),
                c.successes.to_string(),
                c.success_rate.to_string(),
                c.mean_intercept_time.map_or(String::new(), |t| t.to_string()),
            ];
            if with_timing {
                row.push(format!("{:.3}", c.max_cycle_ms));
            }
            csv.write_record(&row).map_err(super::csv_err)?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Every (speed, delay) pair, each run once per seed. Runs are independent
/// and may execute in parallel; results come back in grid order.
pub fn run_sweep(base: &Scenario, speeds: &[f64], delays: &[f64], seeds: &[u64]) -> Result<SweepTable> {
    run_sweep_with(base, &base.resources()?, speeds, delays, seeds)
}

pub fn run_sweep_with(
    base: &Scenario,
    resources: &Resources,
    speeds: &[f64],
    delays: &[f64],
    seeds: &[u64],
) -> Result<SweepTable> {
    run_sweep_observed(base, resources, speeds, delays, seeds, &|_, _| {})
}

/// As [`run_sweep_with`], calling `progress(done, total)` after every run.
pub fn run_sweep_observed(
    base: &Scenario,
    resources: &Resources,
    speeds: &[f64],
    delays: &[f64],
    seeds: &[u64],
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<SweepTable> {
    if speeds.is_empty() || delays.is_empty() || seeds.is_empty() {
        return Err(domain("sweep needs at least one speed, delay and seed"));
    }
    let jobs: Vec<(usize, f64, f64, u64)> = speeds
        .iter()
        .flat_map(|&s| delays.iter().map(move |&d| (s, d)))
        .enumerate()
        .flat_map(|(cell, (s, d))| seeds.iter().map(move |&seed| (cell, s, d, seed)))
        .collect();
    let done = AtomicUsize::new(0);
    let run = |&(_, speed, delay, seed): &(usize, f64, f64, u64)| {
        let mut sc = base.clone();
        sc.target = sc.target.with_max_speed(speed);
        sc.departure_delay = delay;
        let r = run_scenario_with(&sc, resources, seed);
        progress(done.fetch_add(1, Ordering::Relaxed) + 1, jobs.len());
        r
    };
    #[cfg(feature = "native")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "native"))]
    let results: Vec<_> = jobs.iter().map(run).collect::<Result<Vec<_>>>()?;

    let mut cells: Vec<SweepCell> = speeds
        .iter()
        .flat_map(|&s| delays.iter().map(move |&d| (s, d)))
        .map(|(speed, delay)| SweepCell {
            speed,
            delay,
            runs: 0,
            successes: 0,
            success_rate: 0.0,
            mean_intercept_time: None,
            max_cycle_ms: 0.0,
            cycle_ms: Vec::new(),
            cycle_split_ms: Vec::new(),
        })
        .collect();
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); cells.len()];
    for (job, r) in jobs.iter().zip(&results) {
        let c = &mut cells[job.0];
        c.runs += 1;
        if r.success {
            c.successes += 1;
            times[job.0].extend(r.intercept_time);
        }
        c.max_cycle_ms = c.max_cycle_ms.max(r.max_cycle_ms());
        c.cycle_ms.extend(&r.cycle_ms);
        c.cycle_split_ms.extend(&r.cycle_split_ms);
    }
    for (c, t) in cells.iter_mut().zip(&times) {
        c.success_rate = c.successes as f64 / c.runs as f64;
        if !t.is_empty() {
            c.mean_intercept_time = Some(t.iter().sum::<f64>() / t.len() as f64);
        }
    }
    let runs = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    Ok(SweepTable {
        cells,
        runs,
        success_rate: successes as f64 / runs as f64,
    })
}
