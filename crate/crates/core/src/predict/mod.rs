//! Where will the target be? Ground-truth lookup, ground truth with growing
//! Gaussian noise, and a Gaussian mixture over trajectory windows conditioned
//! on recent observations.

mod gmm;
mod training;

use std::sync::Arc;

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gridplan::OccupancyGrid;
use crate::trajectory::PiecewisePolynomialTrajectory;
use crate::types::Vec3;

pub use gmm::{
    gmm_condition, gmm_fit, gmm_fit_with, ConditionalPredictor, GaussianMixture, GaussianMixtureModel, GmmFitOptions,
    GmmFitReport, MixtureEvaluator,
};
pub use training::{generate_training_set, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionConfig {
    /// Spacing of prediction steps (s).
    pub dt: f64,
    pub n_pred: usize,
    /// Samples drawn per step by stochastic predictors.
    pub n_batch: usize,
    /// Observed positions fed to the mixture model.
    pub n_obs: usize,
    /// Per-step noise scale of the noisy predictor (m).
    pub sigma_pred: f64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            n_pred: 20,
            n_batch: 20,
            n_obs: 10,
            sigma_pred: 0.05,
        }
    }
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(domain("prediction dt must be positive"));
        }
        if self.n_pred == 0 || self.n_batch == 0 || self.n_obs == 0 {
            return Err(domain("n_pred, n_batch and n_obs must be at least 1"));
        }
        if !(self.sigma_pred.is_finite() && self.sigma_pred >= 0.0) {
            return Err(domain("sigma_pred must be non-negative"));
        }
        Ok(())
    }

    /// Arrival time of step `i` (1-based).
    pub fn step_time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalCandidate {
    pub position: Vec3,
    /// Time from now at which the target is expected there (s).
    pub t_goal: f64,
    pub likelihood: f64,
    /// Prediction step, `t_goal = step · dt`.
    pub step: usize,
}

pub fn predict_ground_truth(
    target: &PiecewisePolynomialTrajectory,
    t_now: f64,
    config: &PredictionConfig,
) -> Vec<GoalCandidate> {
    (1..=config.n_pred)
        .map(|i| GoalCandidate {
            position: target.evaluate_clamped(t_now + config.step_time(i), 0).position,
            t_goal: config.step_time(i),
            likelihood: 1.0,
            step: i,
        })
        .collect()
}

/// Ground truth plus isotropic noise whose variance grows linearly with the
/// step index, `N(p(t_now + i dt), i σ² I)`.
pub fn predict_noisy(
    target: &PiecewisePolynomialTrajectory,
    t_now: f64,
    config: &PredictionConfig,
    seed: u64,
) -> Vec<GoalCandidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = predict_ground_truth(target, t_now, config);
    let mut out = Vec::with_capacity(truth.len() * config.n_batch);
    for c in &truth {
        let var = c.step as f64 * config.sigma_pred * config.sigma_pred;
        let sd = var.sqrt();
        for _ in 0..config.n_batch {
            let z = Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let likelihood = if var > 0.0 {
                let k = (2.0 * std::f64::consts::PI * var).powf(-1.5);
                k * (-0.5 * z.norm_squared()).exp()
            } else {
                1.0
            };
            out.push(GoalCandidate {
                position: c.position + z * sd,
                t_goal: c.t_goal,
                likelihood,
                step: c.step,
            });
        }
    }
    out
}

/// The target's positions at `t_now − (n_obs − 1 − j) dt`, times clamped at
/// zero, stacked as `x, y, z` triples.
pub fn observation_vector(target: &PiecewisePolynomialTrajectory, t_now: f64, config: &PredictionConfig) -> Vec<f64> {
    (0..config.n_obs)
        .flat_map(|j| {
            let t = (t_now - (config.n_obs - 1 - j) as f64 * config.dt).max(0.0);
            let p = target.evaluate_clamped(t, 0).position;
            [p.x, p.y, p.z]
        })
        .collect()
}

/// Draw `n_batch` positions from each step's marginal of a mixture over the
/// future block and drop those that land on obstacles or outside the grid.
pub fn sample_candidates(
    mixture: &GaussianMixture,
    config: &PredictionConfig,
    grid: &OccupancyGrid,
    seed: u64,
) -> Result<Vec<GoalCandidate>> {
    mixture.validate()?;
    if mixture.dim() != 3 * config.n_pred {
        return Err(domain(format!(
            "mixture dimension {} does not match 3 x n_pred = {}",
            mixture.dim(),
            3 * config.n_pred
        )));
    }
    let pick = WeightedIndex::new(&mixture.weights).map_err(|e| domain(format!("mixture weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 1..=config.n_pred {
        let marginal = mixture.marginal(&[3 * (i - 1), 3 * (i - 1) + 1, 3 * (i - 1) + 2]);
        let eval = marginal.evaluator()?;
        let factors: Vec<_> = (0..marginal.n_components()).map(|k| eval.cholesky_l(k)).collect();
        for _ in 0..config.n_batch {
            let k = pick.sample(&mut rng);
            let z = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            let x = &marginal.means[k] + &factors[k] * z;
            let p = Vec3::new(x[0], x[1], x[2]);
            if !grid.is_free(&p) {
                continue;
            }
            out.push(GoalCandidate {
                position: p,
                t_goal: config.step_time(i),
                likelihood: eval.density(&x),
                step: i,
            });
        }
    }
    Ok(out)
}

/// How the planner obtains goal candidates each cycle.
#[derive(Debug, Clone)]
pub enum Predictor {
    GroundTruth,
    Noisy,
    Gmm(Arc<ConditionalPredictor>),
    /// The target's current position at every step; a plain chase.
    NoPrediction,
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::GroundTruth => "ground_truth",
            Predictor::Noisy => "noisy",
            Predictor::Gmm(_) => "gmm",
            Predictor::NoPrediction => "no_prediction",
        }
    }

    /// Candidates given the target's reference trajectory. Only the mixture
    /// and no-prediction variants restrict themselves to the past.
    pub fn predict(
        &self,
        target: &PiecewisePolynomialTrajectory,
        t_now: f64,
        config: &PredictionConfig,
        grid: &OccupancyGrid,
        seed: u64,
    ) -> Result<Vec<GoalCandidate>> {
        config.validate()?;
        match self {
            Predictor::GroundTruth => Ok(predict_ground_truth(target, t_now, config)),
            Predictor::Noisy => Ok(predict_noisy(target, t_now, config, seed)),
            Predictor::NoPrediction => {
                let p = target.evaluate_clamped(t_now, 0).position;
                Ok((1..=config.n_pred)
                    .map(|i| GoalCandidate {
                        position: p,
                        t_goal: config.step_time(i),
                        likelihood: 1.0,
                        step: i,
                    })
                    .collect())
            }
            Predictor::Gmm(model) => {
                if model.n_obs != config.n_obs || model.n_pred != config.n_pred || (model.dt - config.dt).abs() > 1e-12 {
                    return Err(domain("mixture model window does not match the prediction config"));
                }
                let obs = observation_vector(target, t_now, config);
                let cond = model.condition(&obs)?;
                sample_candidates(&cond, config, grid, seed)
            }
        }
    }
}
