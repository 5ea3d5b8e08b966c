//! GARCH(k, l) conditional variance.
//!
//! For demeaned shocks `a_t = σ_t ξ_t` with unit-variance white noise `ξ_t`,
//!
//! ```text
//! σ_t² = α₀ + Σ_{i=1..k} α_i a²_{t-i} + Σ_{j=1..l} β_j σ²_{t-j}
//! α₀ > 0,  α_i ≥ 0,  β_j ≥ 0,  0 < Σα + Σβ ≤ 1
//! ```
//!
//! Lags that reach before the first observation read a pre-sample value
//! equal to the (population) variance of the shocks, for both `a²` and `σ²`.
//! Fitting maximises the Gaussian log-likelihood with a Nelder-Mead search in
//! an unconstrained coordinate system where the constraints hold by
//! construction.

mod diagnostics;
pub mod optim;
mod volatility;

pub use diagnostics::{
    adf_test, arch_lm_test, chi_squared_quantile, diagnose, AdfResult, ArchLmResult,
    DiagnosticsReport, ADF_CRITICAL_5PCT,
};
pub use volatility::{
    extract_volatility, rolling_std_centered, VolatilityOptions, VolatilitySource, VolatilityTrack,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use optim::SimplexOptions;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GarchError {
    #[error("invalid GARCH parameters: {0}")]
    InvalidParams(String),
    #[error("series of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("series has zero variance")]
    DegenerateSeries,
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("regression design is singular")]
    SingularRegression,
    #[error("lag count must be at least 1")]
    ZeroLags,
}

/// Orders of the recursion: `arch` lagged squared shocks, `garch` lagged variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarchSpec {
    pub arch: usize,
    pub garch: usize,
}

impl GarchSpec {
    pub fn new(arch: usize, garch: usize) -> Result<Self, GarchError> {
        if arch + garch == 0 {
            return Err(GarchError::InvalidParams(
                "at least one ARCH or GARCH lag is required".into(),
            ));
        }
        Ok(Self { arch, garch })
    }

    pub fn max_lag(&self) -> usize {
        self.arch.max(self.garch)
    }

    pub fn param_count(&self) -> usize {
        1 + self.arch + self.garch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub alpha0: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl GarchParams {
    pub fn new(alpha0: f64, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self, GarchError> {
        let p = Self {
            alpha0,
            alphas,
            betas,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn spec(&self) -> GarchSpec {
        GarchSpec {
            arch: self.alphas.len(),
            garch: self.betas.len(),
        }
    }

    pub fn persistence(&self) -> f64 {
        self.alphas.iter().sum::<f64>() + self.betas.iter().sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), GarchError> {
        let bad = |m: String| Err(GarchError::InvalidParams(m));
        if self.alphas.is_empty() && self.betas.is_empty() {
            return bad("at least one ARCH or GARCH coefficient is required".into());
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad(format!("alpha0 = {} must be positive", self.alpha0));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return bad(format!("ARCH coefficient {a} must be non-negative"));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return bad(format!("GARCH coefficient {b} must be non-negative"));
        }
        let s = self.persistence();
        if !(s > 0.0 && s <= 1.0) {
            return bad(format!("coefficient sum {s} must lie in (0, 1]"));
        }
        Ok(())
    }

    /// `α₀ / (1 - Σα - Σβ)`, infinite for integrated processes.
    pub fn unconditional_variance(&self) -> f64 {
        let s = self.persistence();
        if s < 1.0 {
            self.alpha0 / (1.0 - s)
        } else {
            f64::INFINITY
        }
    }
}

fn presample_variance(residuals: &[f64]) -> f64 {
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    residuals.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n
}

fn check_inputs(params: &GarchParams, residuals: &[f64]) -> Result<(), GarchError> {
    params.validate()?;
    let min = params.spec().max_lag().max(1);
    if residuals.len() < min {
        return Err(GarchError::TooShort {
            len: residuals.len(),
            min,
        });
    }
    if let Some(i) = residuals.iter().position(|v| !v.is_finite()) {
        return Err(GarchError::NonFinite(i));
    }
    Ok(())
}

/// One step of the recursion for slot `t = residuals.len()` given the history.
fn next_variance(
    params: &GarchParams,
    residuals: &[f64],
    sigma2: &[f64],
    presample: f64,
) -> f64 {
    let t = sigma2.len();
    let mut s = params.alpha0;
    for (i, a) in params.alphas.iter().enumerate() {
        let lag = i + 1;
        let sq = if lag <= t {
            residuals[t - lag].powi(2)
        } else {
            presample
        };
        s += a * sq;
    }
    for (j, b) in params.betas.iter().enumerate() {
        let lag = j + 1;
        s += b * if lag <= t { sigma2[t - lag] } else { presample };
    }
    s
}

fn path_unchecked(params: &GarchParams, residuals: &[f64], presample: f64) -> Vec<f64> {
    let mut sigma2 = Vec::with_capacity(residuals.len());
    for _ in 0..residuals.len() {
        let next = next_variance(params, residuals, &sigma2, presample);
        sigma2.push(next);
    }
    sigma2
}

fn loglik_unchecked(residuals: &[f64], sigma2: &[f64]) -> f64 {
    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    residuals
        .iter()
        .zip(sigma2)
        .map(|(a, s)| -half_ln_2pi - 0.5 * s.ln() - a * a / (2.0 * s))
        .sum()
}

/// Conditional variance path `σ_1², …, σ_T²`.
pub fn sigma2_path(params: &GarchParams, residuals: &[f64]) -> Result<Vec<f64>, GarchError> {
    check_inputs(params, residuals)?;
    Ok(path_unchecked(params, residuals, presample_variance(residuals)))
}

/// Gaussian log-likelihood `Σ_t [-½ ln 2π - ½ ln σ_t² - a_t² / 2σ_t²]`.
pub fn log_likelihood(params: &GarchParams, residuals: &[f64]) -> Result<f64, GarchError> {
    let sigma2 = sigma2_path(params, residuals)?;
    Ok(loglik_unchecked(residuals, &sigma2))
}

/// Draws `len` shocks from the process after discarding a 500-sample burn-in.
pub fn simulate(params: &GarchParams, len: usize, seed: u64) -> Result<Vec<f64>, GarchError> {
    params.validate()?;
    const BURN_IN: usize = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uv = params.unconditional_variance();
    let start = if uv.is_finite() { uv } else { params.alpha0 };
    let total = BURN_IN + len;
    let mut a = Vec::with_capacity(total);
    let mut sigma2 = Vec::with_capacity(total);
    for _ in 0..total {
        let s2 = next_variance(params, &a, &sigma2, start);
        let xi: f64 = StandardNormal.sample(&mut rng);
        a.push(s2.sqrt() * xi);
        sigma2.push(s2);
    }
    Ok(a.split_off(BURN_IN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub simplex: SimplexOptions,
    /// Extra simplex restarts from the incumbent after each run.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            simplex: SimplexOptions::default(),
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub sigma2_path: Vec<f64>,
    /// Demeaned input `a_t`.
    pub residuals: Vec<f64>,
    pub log_likelihood: f64,
    /// Log-likelihood at the documented starting point (see [`initial_params`]).
    pub initial_log_likelihood: f64,
    pub mean: f64,
    /// Pre-sample value used for lags before the first observation.
    pub presample: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl GarchFit {
    /// One-step-ahead variance `σ²_{T+1}`.
    pub fn forecast_sigma2(&self) -> f64 {
        next_variance(&self.params, &self.residuals, &self.sigma2_path, self.presample)
    }
}

/// Starting points for the search, given as `(Σα, Σβ)` with `α₀` chosen so
/// the unconditional variance equals the sample variance. The first entry is
/// the reference point for the never-worse guarantee.
const STARTS: [(f64, f64); 3] = [(0.05, 0.90), (0.15, 0.75), (0.30, 0.30)];

/// Below this total the ARCH terms count as vanished. The variance path then
/// ignores the data and `Σβ` only shapes the decay away from the pre-sample
/// seed, so among such runs the one with the least persistence is reported.
const ARCH_VANISHED: f64 = 1e-8;

/// The first starting point of [`fit`] for a series with variance `variance`.
pub fn initial_params(spec: GarchSpec, variance: f64) -> GarchParams {
    start_params(spec, variance, STARTS[0])
}

fn start_params(spec: GarchSpec, variance: f64, (sa, sb): (f64, f64)) -> GarchParams {
    let (sa, sb) = match (spec.arch, spec.garch) {
        (0, _) => (0.0, sa + sb),
        (_, 0) => (sa + sb, 0.0),
        _ => (sa, sb),
    };
    GarchParams {
        alpha0: variance * (1.0 - sa - sb),
        alphas: vec![sa / spec.arch.max(1) as f64; spec.arch],
        betas: vec![sb / spec.garch.max(1) as f64; spec.garch],
    }
}

/// Unconstrained coordinates: `θ₀ = ln α₀`, softmax logits for the share of
/// each coefficient (omitted when there is only one), and a logit for the
/// total `Σα + Σβ`.
struct Transform {
    spec: GarchSpec,
}

impl Transform {
    fn weights(&self) -> usize {
        self.spec.arch + self.spec.garch
    }

    fn encode(&self, p: &GarchParams) -> Vec<f64> {
        let total = p.persistence();
        let mut theta = vec![p.alpha0.ln()];
        if self.weights() > 1 {
            theta.extend(p.alphas.iter().chain(&p.betas).map(|c| (c / total).ln()));
        }
        theta.push((total / (1.0 - total)).ln());
        theta
    }

    fn decode(&self, theta: &[f64]) -> GarchParams {
        let alpha0 = theta[0].exp();
        let total = 1.0 / (1.0 + (-theta[theta.len() - 1]).exp());
        let shares: Vec<f64> = if self.weights() > 1 {
            let logits = &theta[1..1 + self.weights()];
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect()
        } else {
            vec![1.0]
        };
        let coef: Vec<f64> = shares.iter().map(|s| s * total).collect();
        GarchParams {
            alpha0,
            alphas: coef[..self.spec.arch].to_vec(),
            betas: coef[self.spec.arch..].to_vec(),
        }
    }
}

/// Gaussian quasi-maximum-likelihood fit of `spec` to `series` after
/// subtracting its sample mean. Deterministic for fixed options.
pub fn fit(series: &[f64], spec: GarchSpec, options: &FitOptions) -> Result<GarchFit, GarchError> {
    GarchSpec::new(spec.arch, spec.garch)?;
    let min = spec.max_lag() + 2;
    if series.len() < min {
        return Err(GarchError::TooShort {
            len: series.len(),
            min,
        });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(GarchError::NonFinite(i));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let residuals: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let presample = presample_variance(&residuals);
    if !(presample > 0.0) {
        return Err(GarchError::DegenerateSeries);
    }

    let transform = Transform { spec };
    let objective = |theta: &[f64]| {
        let p = transform.decode(theta);
        if p.validate().is_err() {
            return f64::INFINITY;
        }
        let path = path_unchecked(&p, &residuals, presample);
        -loglik_unchecked(&residuals, &path)
    };

    let reference = initial_params(spec, presample);
    let initial_ll = loglik_unchecked(&residuals, &path_unchecked(&reference, &residuals, presample));

    let mut runs: Vec<(Vec<f64>, f64, bool)> = Vec::with_capacity(STARTS.len());
    let mut evaluations = 0;
    for start in STARTS {
        let mut theta = transform.encode(&start_params(spec, presample, start));
        let mut run = optim::minimize(objective, &theta, &options.simplex);
        evaluations += run.evals;
        for _ in 0..options.restarts {
            theta = run.x.clone();
            let again = optim::minimize(objective, &theta, &options.simplex);
            evaluations += again.evals;
            let improved = again.value < run.value;
            let settled = (run.value - again.value).abs()
                <= options.simplex.ftol_abs + options.simplex.ftol_rel * again.value.abs();
            if improved {
                run = again;
            }
            if settled {
                break;
            }
        }
        runs.push((run.x, run.value, run.converged));
    }

    let vanished = |theta: &[f64]| {
        transform.decode(theta).alphas.iter().sum::<f64>() < ARCH_VANISHED
    };
    let best = runs
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one starting point");
    let (theta, value, converged) = if spec.arch > 0 && vanished(&best.0) {
        runs.iter()
            .filter(|r| vanished(&r.0) && r.1.is_finite())
            .min_by(|a, b| {
                let pa = transform.decode(&a.0).persistence();
                let pb = transform.decode(&b.0).persistence();
                pa.total_cmp(&pb)
            })
            .unwrap_or(best)
            .clone()
    } else {
        best.clone()
    };
    let mut params = transform.decode(&theta);
    let mut log_likelihood = -value;
    if !(log_likelihood >= initial_ll) {
        params = reference;
        log_likelihood = initial_ll;
    }
    let sigma2_path = path_unchecked(&params, &residuals, presample);

    Ok(GarchFit {
        params,
        sigma2_path,
        residuals,
        log_likelihood,
        initial_log_likelihood: initial_ll,
        mean,
        presample,
        converged,
        evaluations,
    })
}
