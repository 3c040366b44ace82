//! Full-covariance Gaussian mixtures: EM fitting, conditioning on an
//! observed block and JSON persistence.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

/// Cholesky factor with its log-determinant, for repeated density queries.
#[derive(Debug, Clone)]
struct Factor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Factor {
    /// Factorises `m`, adding diagonal jitter if it is not numerically SPD.
    fn new(m: &DMatrix<f64>, jitter: f64) -> Result<Self> {
        let mut add = 0.0;
        for attempt in 0..8 {
            let mut a = m.clone();
            if add > 0.0 {
                for i in 0..a.nrows() {
                    a[(i, i)] += add;
                }
            }
            if let Some(chol) = Cholesky::new(a) {
                if attempt > 0 {
                    log::warn!("covariance regularised with {add:e} on the diagonal");
                }
                let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                return Ok(Self { chol, log_det });
            }
            add = if add == 0.0 { jitter } else { add * 10.0 };
        }
        Err(Error::Numerical {
            message: "covariance is not positive definite".into(),
            condition: f64::INFINITY,
        })
    }

    fn log_density(&self, mean: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let d = x - mean;
        let z = self.chol.l_dirty().solve_lower_triangular(&d).expect("non-singular factor");
        -0.5 * (mean.len() as f64 * LN_2PI + self.log_det + z.norm_squared())
    }

    /// Log-densities of every column of `x`.
    fn log_density_columns(&self, mean: &DVector<f64>, x: &DMatrix<f64>) -> Vec<f64> {
        let mut centered = x.clone();
        for mut c in centered.column_iter_mut() {
            c -= mean;
        }
        let l = self.chol.l();
        let ok = l.solve_lower_triangular_mut(&mut centered);
        debug_assert!(ok);
        let d = mean.len() as f64;
        centered
            .column_iter()
            .map(|c| -0.5 * (d * LN_2PI + self.log_det + c.norm_squared()))
            .collect()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl GaussianMixture {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(domain("mixture needs matching, non-empty weights, means and covariances"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(domain("mixture weights must be non-negative"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(domain(format!("mixture weights sum to {sum}, not 1")));
        }
        let d = self.dim();
        for (m, c) in self.means.iter().zip(&self.covariances) {
            if m.len() != d || c.nrows() != d || c.ncols() != d {
                return Err(domain("inconsistent mixture dimensions"));
            }
        }
        Ok(())
    }

    fn factors(&self) -> Result<Vec<Factor>> {
        self.covariances.iter().map(|c| Factor::new(c, 1e-9)).collect()
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        let f = self.factors()?;
        let terms: Vec<f64> = (0..self.n_components())
            .map(|k| self.weights[k].ln() + f[k].log_density(&self.means[k], x))
            .collect();
        Ok(log_sum_exp(&terms))
    }

    pub fn density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Marginal mixture over the given coordinates.
    pub fn marginal(&self, indices: &[usize]) -> GaussianMixture {
        GaussianMixture {
            weights: self.weights.clone(),
            means: self
                .means
                .iter()
                .map(|m| DVector::from_iterator(indices.len(), indices.iter().map(|&i| m[i])))
                .collect(),
            covariances: self
                .covariances
                .iter()
                .map(|c| DMatrix::from_fn(indices.len(), indices.len(), |r, s| c[(indices[r], indices[s])]))
                .collect(),
        }
    }

    /// Precomputed factors for fast density evaluation.
    pub fn evaluator(&self) -> Result<MixtureEvaluator> {
        Ok(MixtureEvaluator {
            log_weights: self.weights.iter().map(|w| w.ln()).collect(),
            means: self.means.clone(),
            factors: self.factors()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MixtureEvaluator {
    log_weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    factors: Vec<Factor>,
}

impl MixtureEvaluator {
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = (0..self.means.len())
            .map(|k| self.log_weights[k] + self.factors[k].log_density(&self.means[k], x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn density(&self, x: &DVector<f64>) -> f64 {
        self.log_density(x).exp()
    }

    /// Lower Cholesky factor of component `k`'s covariance.
    pub fn cholesky_l(&self, k: usize) -> DMatrix<f64> {
        self.factors[k].chol.l()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmFitOptions {
    pub n_components: usize,
    pub max_iterations: usize,
    /// Stop once the relative objective improvement falls below this.
    pub tolerance: f64,
    /// Diagonal covariance regularisation per sample.
    pub regularization: f64,
    pub seed: u64,
}

impl Default for GmmFitOptions {
    fn default() -> Self {
        Self {
            n_components: 8,
            max_iterations: 200,
            tolerance: 1e-6,
            regularization: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFitReport {
    /// Objective after each E-step: data log-likelihood minus the covariance
    /// penalty `λ/2 Σ tr(Σ⁻¹)`, which EM increases monotonically.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub n_samples: usize,
    pub converged: bool,
}

/// k-means++ seeding: indices of the chosen centres.
fn kmeans_pp(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.ncols();
    let mut centers = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|j| (x.column(j) - x.column(centers[0])).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (j, d) in d2.iter().enumerate() {
                if r < *d {
                    pick = j;
                    break;
                }
                r -= d;
            }
            pick
        };
        centers.push(next);
        for (j, d) in d2.iter_mut().enumerate() {
            *d = d.min((x.column(j) - x.column(next)).norm_squared());
        }
    }
    centers
}

struct EmState {
    x: DMatrix<f64>,
    lambda: f64,
}

impl EmState {
    /// M-step from responsibilities `r` (n × k).
    fn m_step(&self, r: &DMatrix<f64>, previous: Option<&GaussianMixture>) -> GaussianMixture {
        let (d, n) = (self.x.nrows(), self.x.ncols());
        let k = r.ncols();
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut covs = Vec::with_capacity(k);
        for c in 0..k {
            let rk = r.column(c);
            let nk: f64 = rk.sum();
            if nk < 1e-10 {
                // Empty component: keep it inert.
                weights.push(0.0);
                match previous {
                    Some(p) => {
                        means.push(p.means[c].clone());
                        covs.push(p.covariances[c].clone());
                    }
                    None => {
                        means.push(self.x.column(c % n).into_owned());
                        covs.push(DMatrix::identity(d, d));
                    }
                }
                continue;
            }
            let mean = &self.x * rk / nk;
            let mut xw = self.x.clone();
            for (j, mut col) in xw.column_iter_mut().enumerate() {
                col -= &mean;
                col *= rk[j].sqrt();
            }
            let mut cov = &xw * xw.transpose();
            for i in 0..d {
                cov[(i, i)] += self.lambda;
            }
            cov /= nk;
            // Exact symmetry keeps the Cholesky factorisation well defined.
            let cov = (&cov + cov.transpose()) * 0.5;
            weights.push(nk / n as f64);
            means.push(mean);
            covs.push(cov);
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        GaussianMixture {
            weights,
            means,
            covariances: covs,
        }
    }

    /// E-step: responsibilities and the penalised log-likelihood.
    fn e_step(&self, model: &GaussianMixture) -> Result<(DMatrix<f64>, f64)> {
        let n = self.x.ncols();
        let k = model.n_components();
        let mut logp = DMatrix::<f64>::from_element(n, k, f64::NEG_INFINITY);
        let mut penalty = 0.0;
        for c in 0..k {
            let f = Factor::new(&model.covariances[c], 1e-9)?;
            if self.lambda > 0.0 {
                let inv = f.chol.inverse();
                penalty += 0.5 * self.lambda * inv.trace();
            }
            if model.weights[c] <= 0.0 {
                continue;
            }
            let lw = model.weights[c].ln();
            for (j, v) in f.log_density_columns(&model.means[c], &self.x).into_iter().enumerate() {
                logp[(j, c)] = lw + v;
            }
        }
        let mut ll = 0.0;
        let mut r = DMatrix::<f64>::zeros(n, k);
        let mut row = vec![0.0; k];
        for j in 0..n {
            for c in 0..k {
                row[c] = logp[(j, c)];
            }
            let lse = log_sum_exp(&row);
            ll += lse;
            for c in 0..k {
                r[(j, c)] = (row[c] - lse).exp();
            }
        }
        Ok((r, ll - penalty))
    }
}

/// EM with defaults except for the component count and seed.
pub fn gmm_fit(data: &[Vec<f64>], n_components: usize, seed: u64) -> Result<(GaussianMixture, GmmFitReport)> {
    gmm_fit_with(
        data,
        &GmmFitOptions {
            n_components,
            seed,
            ..Default::default()
        },
    )
}

pub fn gmm_fit_with(data: &[Vec<f64>], options: &GmmFitOptions) -> Result<(GaussianMixture, GmmFitReport)> {
    let k = options.n_components;
    if k == 0 {
        return Err(domain("need at least one mixture component"));
    }
    if data.len() < k {
        return Err(domain(format!("{} samples cannot support {k} components", data.len())));
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
        return Err(domain("training vectors must be finite and share one non-zero length"));
    }
    let n = data.len();
    let x = DMatrix::from_fn(d, n, |i, j| data[j][i]);
    let state = EmState {
        x,
        lambda: options.regularization * n as f64 / k as f64,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let centers = kmeans_pp(&state.x, k, &mut rng);
    let mut r0 = DMatrix::<f64>::zeros(n, k);
    for j in 0..n {
        let best = (0..k)
            .min_by(|&a, &b| {
                let da = (state.x.column(j) - state.x.column(centers[a])).norm_squared();
                let db = (state.x.column(j) - state.x.column(centers[b])).norm_squared();
                da.total_cmp(&db)
            })
            .unwrap();
        r0[(j, best)] = 1.0;
    }
    let mut model = state.m_step(&r0, None);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..options.max_iterations {
        let (r, ll) = state.e_step(&model)?;
        iterations += 1;
        let prev = history.last().copied();
        history.push(ll);
        if let Some(p) = prev {
            if (ll - p).abs() <= options.tolerance * p.abs().max(1e-300) {
                converged = true;
                break;
            }
        }
        model = state.m_step(&r, Some(&model));
    }
    Ok((
        model,
        GmmFitReport {
            log_likelihood: history,
            iterations,
            n_samples: n,
            converged,
        },
    ))
}

/// Trajectory mixture over `[observed block; future block]`, each block of
/// positions stored as interleaved `x, y, z` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureModel {
    pub mixture: GaussianMixture,
    pub n_obs: usize,
    pub n_pred: usize,
    pub dt: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Each covariance flattened row-major.
    covariances: Vec<Vec<f64>>,
    n_obs: usize,
    n_pred: usize,
    dt: f64,
}

impl GaussianMixtureModel {
    pub fn new(mixture: GaussianMixture, n_obs: usize, n_pred: usize, dt: f64) -> Result<Self> {
        mixture.validate()?;
        if n_obs == 0 || n_pred == 0 || !(dt > 0.0) {
            return Err(domain("n_obs, n_pred and dt must be positive"));
        }
        if mixture.dim() != 3 * (n_obs + n_pred) {
            return Err(domain(format!(
                "mixture dimension {} does not match 3 x ({n_obs} + {n_pred})",
                mixture.dim()
            )));
        }
        Ok(Self {
            mixture,
            n_obs,
            n_pred,
            dt,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let m = &self.mixture;
        let file = ModelFile {
            weights: m.weights.clone(),
            means: m.means.iter().map(|v| v.iter().copied().collect()).collect(),
            covariances: m
                .covariances
                .iter()
                .map(|c| {
                    let d = c.nrows();
                    (0..d * d).map(|i| c[(i / d, i % d)]).collect()
                })
                .collect(),
            n_obs: self.n_obs,
            n_pred: self.n_pred,
            dt: self.dt,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        let d = 3 * (f.n_obs + f.n_pred);
        if f.means.iter().any(|m| m.len() != d) || f.covariances.iter().any(|c| c.len() != d * d) {
            return Err(domain("model file dimensions are inconsistent"));
        }
        let mixture = GaussianMixture {
            weights: f.weights,
            means: f.means.into_iter().map(DVector::from_vec).collect(),
            covariances: f.covariances.iter().map(|c| DMatrix::from_row_slice(d, d, c)).collect(),
        };
        Self::new(mixture, f.n_obs, f.n_pred, f.dt)
    }
}

#[derive(Debug, Clone)]
struct ConditionalComponent {
    log_weight: f64,
    mu_o: DVector<f64>,
    mu_f: DVector<f64>,
    /// `Σ_fo Σ_oo⁻¹`
    gain: DMatrix<f64>,
    cov: DMatrix<f64>,
    oo: Factor,
}

/// Per-component conditioning terms that do not depend on the observation.
#[derive(Debug, Clone)]
pub struct ConditionalPredictor {
    components: Vec<ConditionalComponent>,
    pub n_obs: usize,
    pub n_pred: usize,
    pub dt: f64,
}

impl ConditionalPredictor {
    pub fn new(model: &GaussianMixtureModel) -> Result<Self> {
        let o = 3 * model.n_obs;
        let f = 3 * model.n_pred;
        let m = &model.mixture;
        let mut components = Vec::with_capacity(m.n_components());
        for k in 0..m.n_components() {
            let c = &m.covariances[k];
            let s_oo = c.view((0, 0), (o, o)).into_owned();
            let s_fo = c.view((o, 0), (f, o)).into_owned();
            let s_ff = c.view((o, o), (f, f)).into_owned();
            let oo = Factor::new(&s_oo, 1e-6)?;
            // gain = Σ_fo Σ_oo⁻¹ = (Σ_oo⁻¹ Σ_of)ᵀ
            let gain = oo.chol.solve(&s_fo.transpose()).transpose();
            let cov = &s_ff - &gain * s_fo.transpose();
            let cov = (&cov + cov.transpose()) * 0.5;
            components.push(ConditionalComponent {
                log_weight: m.weights[k].ln(),
                mu_o: m.means[k].rows(0, o).into_owned(),
                mu_f: m.means[k].rows(o, f).into_owned(),
                gain,
                cov,
                oo,
            });
        }
        Ok(Self {
            components,
            n_obs: model.n_obs,
            n_pred: model.n_pred,
            dt: model.dt,
        })
    }

    /// Mixture over the future block given the observed block.
    pub fn condition(&self, observed: &[f64]) -> Result<GaussianMixture> {
        if observed.len() != 3 * self.n_obs || observed.iter().any(|v| !v.is_finite()) {
            return Err(domain(format!("expected {} finite observed values", 3 * self.n_obs)));
        }
        let obs = DVector::from_column_slice(observed);
        let logw: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.log_weight + c.oo.log_density(&c.mu_o, &obs))
            .collect();
        let lse = log_sum_exp(&logw);
        let mut weights: Vec<f64> = logw.iter().map(|l| (l - lse).exp()).collect();
        if !lse.is_finite() {
            // Observation far from every component: fall back to the priors.
            weights = self.components.iter().map(|c| c.log_weight.exp()).collect();
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(GaussianMixture {
            weights,
            means: self.components.iter().map(|c| &c.mu_f + &c.gain * (&obs - &c.mu_o)).collect(),
            covariances: self.components.iter().map(|c| c.cov.clone()).collect(),
        })
    }
}

/// Gaussian conditioning of every component on the observed block, with
/// weights reweighted by the observation likelihood.
pub fn gmm_condition(model: &GaussianMixtureModel, observed: &[f64]) -> Result<GaussianMixture> {
    ConditionalPredictor::new(model)?.condition(observed)
}
