//! Command-line entry points: `fit-gmm`, `run`, `sweep`, `dump-traj` and
//! `replay`.
//!
//! Every command that produces results first writes a `manifest.json`
//! describing exactly how it was invoked; `replay` re-executes a manifest.
//! Wall-clock timings vary between runs, so they go to separate timing files
//! and the result files stay byte-identical under a fixed seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gridplan::{GridSpec, OccupancyGrid};
use crate::predict::{
    generate_training_set, gmm_fit_with, GaussianMixtureModel, GmmFitOptions, GmmFitReport, PredictionConfig,
    TrainingConfig,
};
use crate::sim::{
    make_target_trajectory, run_scenario_with, run_sweep_observed, write_trace_csv, DeskEnvironment, PredictorChoice,
    Scenario, SimResult,
};
use crate::trajectory::PiecewisePolynomialTrajectory;

pub const SEED_ENV: &str = "INTERCEPT_SEED";

#[derive(Debug, Parser)]
#[command(name = "intercept", version, about = "Online interception planning and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Fit a Gaussian mixture trajectory predictor.
    FitGmm(FitGmmArgs),
    /// Simulate one scenario.
    Run(RunArgs),
    /// Success rates over target speeds and departure delays.
    Sweep(SweepArgs),
    /// Sample a trajectory JSON file into CSV.
    DumpTraj(DumpTrajArgs),
    /// Write a desk-room scenario file to start from.
    NewScenario(NewScenarioArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitGmmArgs {
    /// Fit configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory of CSV files, one training window per row.
    #[arg(long, conflicts_with = "synthesize", required_unless_present = "synthesize")]
    pub data_dir: Option<PathBuf>,
    /// Generate training windows from random trajectories in the configured grid.
    #[arg(long)]
    pub synthesize: bool,
    /// Output model file; the report and manifest are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RunArgs {
    /// Scenario file (JSON).
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-cycle compute budget reported against (ms).
    #[arg(long, default_value_t = 100.0)]
    pub budget_ms: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Scenario file (JSON); its target speed and departure delay are overridden.
    pub scenario: PathBuf,
    /// Target speeds (m/s).
    #[arg(long, value_delimiter = ',', default_values_t = default_speeds())]
    pub speeds: Vec<f64>,
    /// Departure delays (s).
    #[arg(long, value_delimiter = ',', default_values_t = default_delays())]
    pub delays: Vec<f64>,
    /// Runs per cell; run seeds are `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, default_value_t = 100.0)]
    pub budget_ms: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DumpTrajArgs {
    /// Trajectory file (JSON).
    pub trajectory: PathBuf,
    /// Sample spacing (s).
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NewScenarioArgs {
    #[arg(long, value_enum, default_value_t = EnvArg::EmptyRoom)]
    pub env: EnvArg,
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, default_value_t = 0.5)]
    pub delay: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvArg {
    EmptyRoom,
    PillaredRoom,
    Corridor,
    ScatteredBoxes,
}

impl From<EnvArg> for DeskEnvironment {
    fn from(e: EnvArg) -> Self {
        match e {
            EnvArg::EmptyRoom => DeskEnvironment::EmptyRoom,
            EnvArg::PillaredRoom => DeskEnvironment::PillaredRoom,
            EnvArg::Corridor => DeskEnvironment::Corridor,
            EnvArg::ScatteredBoxes => DeskEnvironment::ScatteredBoxes,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this directory (or model path) instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Ten speeds from 0.5 m/s in 0.5 m/s steps.
pub fn default_speeds() -> Vec<f64> {
    (1..=10).map(|i| 0.5 * i as f64).collect()
}

/// Ten delays evenly spaced over [0.5, 2.5] s.
pub fn default_delays() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 2.0 * i as f64 / 9.0).collect()
}

/// Settings for `fit-gmm`. Every field has a default, so `{}` is a valid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Room the synthetic trajectories fly through.
    pub grid: GridSpec,
    pub prediction: PredictionConfig,
    pub training: TrainingConfig,
    pub trajectories: usize,
    /// Mixture options; the seed is taken from the command line.
    pub gmm: GmmFitOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            grid: DeskEnvironment::EmptyRoom.grid_spec(),
            prediction: PredictionConfig::default(),
            training: TrainingConfig::default(),
            trajectories: 200,
            gmm: GmmFitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Effective seed after the environment override.
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub output: PathBuf,
    /// The full command with every parameter resolved.
    pub invocation: Command,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub n_components: usize,
    pub dimension: usize,
    pub weights: Vec<f64>,
    pub final_log_likelihood: f64,
    #[serde(flatten)]
    pub report: GmmFitReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub budget_ms: f64,
    pub cycles: usize,
    pub median_ms: f64,
    pub max_ms: f64,
    pub over_budget: usize,
    /// Mean `[prediction, search, optimisation]` split (ms).
    pub mean_split_ms: [f64; 3],
}

impl TimingSummary {
    pub fn new(budget_ms: f64, cycle_ms: &[f64], split_ms: &[[f64; 3]]) -> Self {
        let mut sorted = cycle_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut mean = [0.0; 3];
        for s in split_ms {
            for k in 0..3 {
                mean[k] += s[k] / split_ms.len() as f64;
            }
        }
        Self {
            budget_ms,
            cycles: sorted.len(),
            median_ms: median(&sorted),
            max_ms: sorted.last().copied().unwrap_or(0.0),
            over_budget: sorted.iter().filter(|&&t| t > budget_ms).count(),
            mean_split_ms: mean,
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// Command failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid configuration (exit 2).
    Usage(String),
    /// The command started but failed (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn usage(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{context}: {e}"))
}

fn runtime(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns its exit
/// code. Messages go to standard error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => match s.trim().parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                eprintln!("error: {SEED_ENV}={s:?} is not an unsigned integer");
                return ExitCode::from(2);
            }
        },
        Err(_) => None,
    };
    match execute(apply_seed_override(cli.command, env_seed)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Replaces the command's seed with `seed` when one is given.
pub fn apply_seed_override(mut command: Command, seed: Option<u64>) -> Command {
    if let Some(s) = seed {
        match &mut command {
            Command::FitGmm(a) => a.seed = s,
            Command::Run(a) => a.seed = s,
            Command::Sweep(a) => a.seed = s,
            Command::DumpTraj(_) | Command::NewScenario(_) | Command::Replay(_) => {}
        }
    }
    command
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::FitGmm(a) => cmd_fit_gmm(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::DumpTraj(a) => cmd_dump_traj(&a),
        Command::NewScenario(a) => cmd_new_scenario(&a),
        Command::Replay(a) => cmd_replay(&a),
    }
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| runtime("serialising output", e))?;
    s.push('\n');
    write_atomic(path, s.as_bytes()).map_err(|e| runtime(&format!("writing {}", path.display()), e))
}

fn write_manifest(path: &Path, seed: u64, config: Option<&Path>, output: &Path, invocation: &Command) -> CliResult<()> {
    let manifest = RunManifest {
        tool: "intercept".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config: config.map(Path::to_path_buf),
        output: output.to_path_buf(),
        invocation: invocation.clone(),
    };
    write_json(path, &manifest)
}

fn read_text(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(&format!("reading {what} {}", path.display()), e))
}

/// Loads a scenario, resolving a relative mixture-model path against the
/// scenario file's directory.
pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = read_text(path, "scenario")?;
    let mut sc = Scenario::from_json(&text).map_err(|e| usage(&format!("parsing scenario {}", path.display()), e))?;
    if let PredictorChoice::Gmm { model } = &mut sc.predictor {
        if model.is_relative() {
            if let Some(dir) = path.parent() {
                *model = dir.join(&*model);
            }
        }
    }
    Ok(sc)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Reads every `*.csv` file in `dir` (sorted by name). Rows that do not parse
/// as numbers, such as headers, are skipped.
pub fn read_windows(dir: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| usage(&format!("reading data directory {}", dir.display()), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in &files {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(f)
            .map_err(|e| usage(&format!("reading {}", f.display()), e))?;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| usage(&format!("reading {}", f.display()), e))?;
            let row: Option<Vec<f64>> = rec.iter().map(|v| v.trim().parse().ok()).collect();
            if let Some(r) = row {
                out.push(r);
            }
        }
    }
    Ok(out)
}

pub fn cmd_fit_gmm(a: &FitGmmArgs) -> CliResult<()> {
    let text = read_text(&a.config, "config")?;
    let config: FitConfig = serde_json::from_str(&text).map_err(|e| usage("parsing fit config", e))?;
    config.prediction.validate().map_err(|e| usage("fit config", e))?;
    config.training.validate().map_err(|e| usage("fit config", e))?;
    let grid = OccupancyGrid::from_spec(config.grid.clone()).map_err(|e| usage("fit config grid", e))?;
    write_manifest(
        &sibling(&a.out, "manifest.json"),
        a.seed,
        Some(&a.config),
        &a.out,
        &Command::FitGmm(a.clone()),
    )?;

    let data = match &a.data_dir {
        Some(dir) => read_windows(dir)?,
        None => {
            eprintln!("generating windows from {} trajectories", config.trajectories);
            generate_training_set(&grid, config.trajectories, &config.prediction, &config.training, a.seed)
                .map_err(|e| runtime("generating training data", e))?
        }
    };
    let dim = 3 * (config.prediction.n_obs + config.prediction.n_pred);
    if let Some(bad) = data.iter().position(|w| w.len() != dim) {
        return Err(usage(
            "training data",
            format!("window {bad} has {} values, expected {dim}", data[bad].len()),
        ));
    }
    eprintln!("fitting {} components to {} windows of dimension {dim}", config.gmm.n_components, data.len());
    let options = GmmFitOptions {
        seed: a.seed,
        ..config.gmm
    };
    let (mixture, report) = gmm_fit_with(&data, &options).map_err(|e| runtime("fitting mixture", e))?;
    let model = GaussianMixtureModel::new(mixture, config.prediction.n_obs, config.prediction.n_pred, config.prediction.dt)
        .map_err(|e| runtime("building model", e))?;
    let json = model.to_json().map_err(|e| runtime("serialising model", e))?;
    write_atomic(&a.out, json.as_bytes()).map_err(|e| runtime(&format!("writing {}", a.out.display()), e))?;
    let summary = FitSummary {
        n_components: model.mixture.n_components(),
        dimension: model.mixture.dim(),
        weights: model.mixture.weights.clone(),
        final_log_likelihood: report.log_likelihood.last().copied().unwrap_or(f64::NAN),
        report,
    };
    write_json(&sibling(&a.out, "report.json"), &summary)?;
    eprintln!(
        "{} iterations, converged {}, log-likelihood {:.6e}",
        summary.report.iterations, summary.report.converged, summary.final_log_likelihood
    );
    Ok(())
}

fn sim_error(e: Error) -> CliError {
    runtime("simulation failed", e)
}

pub fn cmd_run(a: &RunArgs) -> CliResult<()> {
    let sc = load_scenario(&a.scenario)?;
    let res = sc.resources().map_err(|e| usage("preparing scenario", e))?;
    fs::create_dir_all(&a.out).map_err(|e| runtime("creating output directory", e))?;
    write_manifest(&a.out.join("manifest.json"), a.seed, Some(&a.scenario), &a.out, &Command::Run(a.clone()))?;

    let wps = sc.target_waypoints(&res.grid, a.seed).map_err(sim_error)?;
    let target = make_target_trajectory(&wps, sc.target.max_speed()).map_err(sim_error)?;
    let result: SimResult = run_scenario_with(&sc, &res, a.seed).map_err(sim_error)?;

    write_json(&a.out.join("target.json"), &target)?;
    write_json(&a.out.join("result.json"), &result)?;
    let mut trace = Vec::new();
    write_trace_csv(&result, &mut trace).map_err(|e| runtime("writing trace", e))?;
    write_atomic(&a.out.join("trace.csv"), &trace).map_err(|e| runtime("writing trace", e))?;

    let timing = TimingSummary::new(a.budget_ms, &result.cycle_ms, &result.cycle_split_ms);
    #[derive(Serialize)]
    struct RunTiming<'a> {
        #[serde(flatten)]
        summary: &'a TimingSummary,
        cycle_ms: &'a [f64],
        split_ms: &'a [[f64; 3]],
    }
    write_json(
        &a.out.join("timing.json"),
        &RunTiming {
            summary: &timing,
            cycle_ms: &result.cycle_ms,
            split_ms: &result.cycle_split_ms,
        },
    )?;
    match result.intercept_time {
        Some(t) => eprintln!("intercepted at {t:.2} s"),
        None => eprintln!("no interception, closest approach {:.3} m", result.min_distance),
    }
    report_budget(&timing);
    Ok(())
}

fn report_budget(t: &TimingSummary) {
    eprintln!(
        "{} cycles, median {:.1} ms, max {:.1} ms, {} over the {} ms budget; mean split prediction {:.1} / search {:.1} / optimisation {:.1} ms",
        t.cycles, t.median_ms, t.max_ms, t.over_budget, t.budget_ms, t.mean_split_ms[0], t.mean_split_ms[1], t.mean_split_ms[2]
    );
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    if a.speeds.is_empty() || a.delays.is_empty() || a.seeds == 0 {
        return Err(CliError::Usage("sweep needs at least one speed, delay and seed".into()));
    }
    if a.speeds.iter().any(|s| !(*s > 0.0)) || a.delays.iter().any(|d| !(*d >= 0.0)) {
        return Err(CliError::Usage("speeds must be positive and delays non-negative".into()));
    }
    let sc = load_scenario(&a.scenario)?;
    let res = sc.resources().map_err(|e| usage("preparing scenario", e))?;
    fs::create_dir_all(&a.out).map_err(|e| runtime("creating output directory", e))?;
    write_manifest(&a.out.join("manifest.json"), a.seed, Some(&a.scenario), &a.out, &Command::Sweep(a.clone()))?;

    let seeds: Vec<u64> = (0..a.seeds).map(|i| a.seed.wrapping_add(i)).collect();
    let progress = |done: usize, total: usize| {
        if done == total || done % 10 == 0 {
            eprintln!("{done}/{total} runs");
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| runtime("starting worker threads", e))?;
    let table = pool
        .install(|| run_sweep_observed(&sc, &res, &a.speeds, &a.delays, &seeds, &progress))
        .map_err(sim_error)?;

    let mut csv = Vec::new();
    table.write_csv(&mut csv, false).map_err(|e| runtime("writing table", e))?;
    write_atomic(&a.out.join("sweep.csv"), &csv).map_err(|e| runtime("writing table", e))?;
    write_json(&a.out.join("sweep.json"), &table)?;
    let mut timing_csv = Vec::new();
    table.write_csv(&mut timing_csv, true).map_err(|e| runtime("writing timing", e))?;
    write_atomic(&a.out.join("timing.csv"), &timing_csv).map_err(|e| runtime("writing timing", e))?;
    let all: Vec<f64> = table.cells.iter().flat_map(|c| c.cycle_ms.iter().copied()).collect();
    let split: Vec<[f64; 3]> = table.cells.iter().flat_map(|c| c.cycle_split_ms.iter().copied()).collect();
    let timing = TimingSummary::new(a.budget_ms, &all, &split);
    write_json(&a.out.join("timing.json"), &timing)?;
    eprintln!("success rate {:.3} over {} runs", table.success_rate, table.runs);
    report_budget(&timing);
    Ok(())
}

/// Rows `t, x, y, z, yaw, vx, vy, vz, speed`.
pub fn dump_trajectory<W: Write>(traj: &PiecewisePolynomialTrajectory, dt: f64, w: W) -> crate::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["t", "x", "y", "z", "yaw", "vx", "vy", "vz", "speed"])
        .map_err(crate::sim::csv_err)?;
    let total = traj.total_time();
    let n = (total / dt).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    if total - n as f64 * dt > 1e-9 {
        times.push(total);
    }
    for t in times {
        let p = traj.evaluate_clamped(t, 0);
        let v = traj.evaluate_clamped(t, 1).position;
        let row = [t, p.position.x, p.position.y, p.position.z, p.yaw, v.x, v.y, v.z, v.norm()];
        csv.write_record(row.iter().map(|x| x.to_string())).map_err(crate::sim::csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn cmd_dump_traj(a: &DumpTrajArgs) -> CliResult<()> {
    if !(a.dt > 0.0) {
        return Err(CliError::Usage("--dt must be positive".into()));
    }
    let text = read_text(&a.trajectory, "trajectory")?;
    let traj: PiecewisePolynomialTrajectory = serde_json::from_str(&text).map_err(|e| usage("parsing trajectory", e))?;
    traj.validate().map_err(|e| usage("trajectory", e))?;
    let mut buf = Vec::new();
    dump_trajectory(&traj, a.dt, &mut buf).map_err(|e| runtime("sampling trajectory", e))?;
    match &a.out {
        Some(p) => write_atomic(p, &buf).map_err(|e| runtime(&format!("writing {}", p.display()), e)),
        None => std::io::stdout().write_all(&buf).map_err(|e| runtime("writing output", e)),
    }
}

pub fn cmd_new_scenario(a: &NewScenarioArgs) -> CliResult<()> {
    let sc = DeskEnvironment::from(a.env).scenario(a.speed, a.delay);
    sc.validate().map_err(|e| usage("scenario", e))?;
    let mut s = sc.to_json().map_err(|e| runtime("serialising scenario", e))?;
    s.push('\n');
    match &a.out {
        Some(p) => write_atomic(p, s.as_bytes()).map_err(|e| runtime(&format!("writing {}", p.display()), e)),
        None => std::io::stdout().write_all(s.as_bytes()).map_err(|e| runtime("writing output", e)),
    }
}

pub fn cmd_replay(a: &ReplayArgs) -> CliResult<()> {
    let text = read_text(&a.manifest, "manifest")?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| usage("parsing manifest", e))?;
    let mut command = manifest.invocation;
    if let Some(out) = &a.out {
        match &mut command {
            Command::FitGmm(c) => c.out = out.clone(),
            Command::Run(c) => c.out = out.clone(),
            Command::Sweep(c) => c.out = out.clone(),
            Command::DumpTraj(c) => c.out = Some(out.clone()),
            Command::NewScenario(c) => c.out = Some(out.clone()),
            Command::Replay(_) => {}
        }
    }
    if matches!(command, Command::Replay(_)) {
        return Err(CliError::Usage("a manifest cannot record a replay".into()));
    }
    execute(command)
}
