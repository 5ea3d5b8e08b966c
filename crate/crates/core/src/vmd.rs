//! Variational mode decomposition.
//!
//! A signal `f` is split into `K` modes `u_k`, each compact around a centre
//! frequency `ω_k`, by alternating minimisation of the augmented Lagrangian
//!
//! ```text
//! L = α Σ_k ‖∂t[(δ + i/πt) * u_k] e^{-iω_k t}‖² + ‖f - Σ_k u_k‖² + ⟨λ, f - Σ_k u_k⟩
//! ```
//!
//! Everything happens on the one-sided spectrum (bins `0 ..= N/2`, frequency
//! in cycles per sample): zeroing the negative half is the analytic-signal
//! (Hilbert) step, and the demodulated bandwidth term becomes a quadratic
//! weight `(ω - ω_k)²`. Setting each block's derivative to zero gives:
//!
//! ```text
//! û_k ← (f̂ - Σ_{i≠k} û_i + λ̂/2) / (1 + 2α(ω - ω_k)²)      Wiener filter
//! ω_k ← Σ ω |û_k(ω)|² / Σ |û_k(ω)|²                         spectral centroid
//! λ̂  ← λ̂ + τ (f̂ - Σ_k û_k)                                 dual ascent
//! ```
//!
//! Modes are swept in order `k = 1..K` within an iteration (Gauss-Seidel), so
//! later modes see the freshly updated earlier ones. Iteration stops once
//! `Σ_k ‖û_k^{n+1} - û_k^n‖² / ‖û_k^n‖² < tol` or after `max_iter` sweeps; not
//! converging is reported through [`ModeSet::final_delta`], never as an error.
//! Each mode is brought back to the time domain by restoring conjugate
//! symmetry and inverting, then cropped if the input was mirror-extended.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::{dft_real, idft, Complex};
use crate::series::{SeriesError, TimeSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VmdError {
    #[error("signal of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("invalid VMD configuration: {0}")]
    InvalidConfig(String),
    #[error("mode {mode} leaked imaginary part {leak:e} after inversion")]
    ImaginaryLeakage { mode: usize, leak: f64 },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaInit {
    /// `ω_k = 0.5 (k - 1) / K`.
    Uniform,
    Zero,
    /// Log-uniform draws between `1/T` and `0.5`, sorted.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmdConfig {
    pub modes: usize,
    pub alpha: f64,
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub init_omega: OmegaInit,
    pub mirror_extend: bool,
    pub dc_mode: bool,
}

impl Default for VmdConfig {
    fn default() -> Self {
        Self {
            modes: 10,
            alpha: 2000.0,
            tau: 0.0,
            tol: 1e-7,
            max_iter: 500,
            init_omega: OmegaInit::Uniform,
            mirror_extend: true,
            dc_mode: false,
        }
    }
}

impl VmdConfig {
    pub fn with_modes(modes: usize) -> Self {
        Self {
            modes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), VmdError> {
        let bad = |msg: &str| Err(VmdError::InvalidConfig(msg.to_string()));
        if self.modes < 1 {
            return bad("modes must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau must be non-negative");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        Ok(())
    }
}

/// Output of [`decompose`]: modes sorted by ascending centre frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    modes: Vec<Vec<f64>>,
    omegas: Vec<f64>,
    residual: Vec<f64>,
    iterations: usize,
    final_delta: f64,
}

impl ModeSet {
    /// Assembles a mode set from precomputed modes against the signal they
    /// decompose; the residual is the exact gap `signal - Σ modes`.
    pub fn from_parts(
        signal: &[f64],
        modes: Vec<Vec<f64>>,
        omegas: Vec<f64>,
    ) -> Result<Self, VmdError> {
        if modes.is_empty() || modes.len() != omegas.len() {
            return Err(VmdError::InvalidConfig(
                "need one centre frequency per mode and at least one mode".into(),
            ));
        }
        if modes.iter().any(|m| m.len() != signal.len()) {
            return Err(VmdError::InvalidConfig("mode length differs from signal".into()));
        }
        let summed = sum_modes(&modes);
        let residual = signal.iter().zip(&summed).map(|(x, s)| x - s).collect();
        Ok(Self {
            modes,
            omegas,
            residual,
            iterations: 0,
            final_delta: 0.0,
        })
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn final_delta(&self) -> f64 {
        self.final_delta
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.residual.len()
    }
}

/// Reflects the first `T/2` samples in front and the remaining `T - T/2`
/// behind, giving a series of length `2T`.
pub fn mirror_extend(signal: &[f64]) -> Result<Vec<f64>, VmdError> {
    let t = signal.len();
    if t < 2 {
        return Err(VmdError::TooShort { len: t, min: 2 });
    }
    let half = t / 2;
    let mut out = Vec::with_capacity(2 * t);
    out.extend(signal[..half].iter().rev());
    out.extend_from_slice(signal);
    out.extend(signal[half..].iter().rev());
    Ok(out)
}

/// Inverse of [`mirror_extend`] for an original length of `len`.
pub fn crop_center(extended: &[f64], len: usize) -> Vec<f64> {
    let half = len / 2;
    extended[half..half + len].to_vec()
}

/// Elementwise sum of the modes (the residual is not included).
pub fn reconstruct(modes: &ModeSet) -> Vec<f64> {
    sum_modes(&modes.modes)
}

fn sum_modes(modes: &[Vec<f64>]) -> Vec<f64> {
    let len = modes.first().map_or(0, Vec::len);
    let mut out = vec![0.0; len];
    for m in modes {
        for (o, v) in out.iter_mut().zip(m) {
            *o += v;
        }
    }
    out
}

pub fn decompose(signal: &TimeSeries, config: &VmdConfig) -> Result<ModeSet, VmdError> {
    decompose_values(signal.values(), config)
}

/// [`decompose`] on a raw slice; the slice must hold only finite values.
pub fn decompose_values(input: &[f64], config: &VmdConfig) -> Result<ModeSet, VmdError> {
    config.validate()?;
    let t = input.len();
    let k_modes = config.modes;
    let min = (2 * k_modes).max(2);
    if t < min {
        return Err(VmdError::TooShort { len: t, min });
    }
    if let Some(index) = input.iter().position(|v| !v.is_finite()) {
        return Err(SeriesError::NonFinite { index }.into());
    }

    let extended = if config.mirror_extend {
        mirror_extend(input)?
    } else {
        input.to_vec()
    };
    let n = extended.len();
    let bins = n / 2 + 1;
    let spectrum = dft_real(&extended);
    let f_plus = &spectrum[..bins];
    let freqs: Vec<f64> = (0..bins).map(|j| j as f64 / n as f64).collect();

    let mut omegas = initial_omegas(config, t);
    let mut u = vec![vec![Complex::ZERO; bins]; k_modes];
    let mut lambda = vec![Complex::ZERO; bins];
    let mut others = vec![Complex::ZERO; bins];
    let collide = 1.0 / (4.0 * t as f64);

    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    while iterations < config.max_iter {
        delta = 0.0;
        for k in 0..k_modes {
            others.fill(Complex::ZERO);
            for (i, ui) in u.iter().enumerate() {
                if i != k {
                    for (o, v) in others.iter_mut().zip(ui) {
                        *o += *v;
                    }
                }
            }

            let omega_k = omegas[k];
            let mut diff = 0.0;
            let mut prev_energy = 0.0;
            let mut energy = 0.0;
            let mut moment = 0.0;
            for j in 0..bins {
                let w = freqs[j] - omega_k;
                let next = (f_plus[j] - others[j] + lambda[j].scale(0.5))
                    .unscale(1.0 + 2.0 * config.alpha * w * w);
                let old = u[k][j];
                diff += (next - old).norm_sqr();
                prev_energy += old.norm_sqr();
                let e = next.norm_sqr();
                energy += e;
                moment += freqs[j] * e;
                u[k][j] = next;
            }
            delta += if prev_energy > 0.0 {
                diff / prev_energy
            } else if diff > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };

            let pinned = config.dc_mode && k == 0;
            if !pinned && energy > 0.0 {
                omegas[k] = moment / energy;
            }
        }

        for i in 1..k_modes {
            for j in 0..i {
                if (omegas[i] - omegas[j]).abs() < 1e-6 {
                    omegas[i] = (omegas[i] + collide).min(0.5);
                }
            }
        }

        if config.tau > 0.0 {
            for j in 0..bins {
                let total = u.iter().fold(Complex::ZERO, |acc, uk| acc + uk[j]);
                lambda[j] += (f_plus[j] - total).scale(config.tau);
            }
        }

        iterations += 1;
        if delta < config.tol {
            break;
        }
    }

    let scale = input.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut modes = Vec::with_capacity(k_modes);
    for (k, uk) in u.iter().enumerate() {
        let time = inverse_one_sided(uk, n);
        let leak = time.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
        if leak > 1e-8 * scale {
            return Err(VmdError::ImaginaryLeakage { mode: k + 1, leak });
        }
        let real: Vec<f64> = time.iter().map(|v| v.re).collect();
        modes.push(if config.mirror_extend {
            crop_center(&real, t)
        } else {
            real
        });
    }

    let mut order: Vec<usize> = (0..k_modes).collect();
    order.sort_by(|&a, &b| omegas[a].total_cmp(&omegas[b]).then(a.cmp(&b)));
    let modes: Vec<Vec<f64>> = order.iter().map(|&i| std::mem::take(&mut modes[i])).collect();
    let omegas: Vec<f64> = order.iter().map(|&i| omegas[i]).collect();

    let mut set = ModeSet::from_parts(input, modes, omegas)?;
    set.iterations = iterations;
    set.final_delta = delta;
    Ok(set)
}

fn initial_omegas(config: &VmdConfig, t: usize) -> Vec<f64> {
    let k = config.modes;
    let mut omegas: Vec<f64> = match config.init_omega {
        OmegaInit::Uniform => (0..k).map(|i| 0.5 * i as f64 / k as f64).collect(),
        OmegaInit::Zero => vec![0.0; k],
        OmegaInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lo = (1.0 / t as f64).ln();
            let hi = 0.5f64.ln();
            let mut w: Vec<f64> = (0..k)
                .map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp())
                .collect();
            w.sort_by(f64::total_cmp);
            w
        }
    };
    if config.dc_mode {
        omegas[0] = 0.0;
    }
    omegas
}

/// Restores the negative half by conjugate symmetry and inverts. DC and, for
/// even `n`, Nyquist are self-conjugate and keep only their real part.
fn inverse_one_sided(half: &[Complex], n: usize) -> Vec<Complex> {
    let mut full = vec![Complex::ZERO; n];
    full[0] = Complex::new(half[0].re, 0.0);
    for (j, &v) in half.iter().enumerate().skip(1) {
        if 2 * j == n {
            full[j] = Complex::new(v.re, 0.0);
        } else {
            full[j] = v;
            full[n - j] = v.conj();
        }
    }
    idft(&full)
}
