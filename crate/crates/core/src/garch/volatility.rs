//! Turning a mode into a volatility series, with fallbacks so that one
//! awkward mode never stops the whole pipeline.
//!
//! * The ADF test runs on the mode first. If it cannot reject a unit root the
//!   GARCH model is fitted to first differences instead of levels.
//! * If the likelihood search does not converge, or the fit fails outright,
//!   a centred rolling standard deviation is used and the reason recorded.

use serde::{Deserialize, Serialize};

use super::{adf_test, fit, next_variance, FitOptions, GarchError, GarchFit, GarchSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityOptions {
    pub spec: GarchSpec,
    pub fit: FitOptions,
    pub adf_lags: usize,
    pub fallback_window: usize,
}

impl Default for VolatilityOptions {
    fn default() -> Self {
        Self {
            spec: GarchSpec { arch: 10, garch: 10 },
            fit: FitOptions::default(),
            adf_lags: 1,
            fallback_window: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolatilitySource {
    Garch {
        fit: GarchFit,
        /// Fitted on `Δy` because the levels kept their unit root.
        differenced: bool,
    },
    RollingStd {
        window: usize,
        reason: String,
    },
}

impl VolatilitySource {
    pub fn is_fallback(&self) -> bool {
        matches!(self, Self::RollingStd { .. })
    }

    pub fn garch(&self) -> Option<&GarchFit> {
        match self {
            Self::Garch { fit, .. } => Some(fit),
            Self::RollingStd { .. } => None,
        }
    }
}

/// Fits the volatility model for one mode's training values.
pub fn extract_volatility(
    values: &[f64],
    options: &VolatilityOptions,
) -> Result<VolatilitySource, GarchError> {
    if values.len() < 2 {
        return Err(GarchError::TooShort {
            len: values.len(),
            min: 2,
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(GarchError::NonFinite(i));
    }
    let stationary = matches!(adf_test(values, options.adf_lags), Ok(r) if r.reject);
    let differenced = !stationary;
    let input: Vec<f64> = if differenced {
        values.windows(2).map(|w| w[1] - w[0]).collect()
    } else {
        values.to_vec()
    };
    let fallback = |reason: String| VolatilitySource::RollingStd {
        window: options.fallback_window,
        reason,
    };
    Ok(match fit(&input, options.spec, &options.fit) {
        Ok(f) if f.converged => VolatilitySource::Garch { fit: f, differenced },
        Ok(_) => fallback("likelihood search did not converge".into()),
        Err(e) => fallback(e.to_string()),
    })
}

/// Population standard deviation over a window of `window` points centred on
/// each index (`t - window/2 ..= t + (window - 1)/2`), truncated at the ends.
pub fn rolling_std_centered(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let back = window / 2;
    let fwd = window - 1 - back;
    (0..values.len())
        .map(|t| {
            let lo = t.saturating_sub(back);
            let hi = (t + fwd + 1).min(values.len());
            population_std(&values[lo..hi])
        })
        .collect()
}

fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum TrackState {
    Garch {
        fit: GarchFit,
        differenced: bool,
        last_level: f64,
    },
    Rolling {
        window: usize,
        levels: Vec<f64>,
    },
}

/// Conditional volatility `σ_t` aligned with a mode's index, extendable one
/// realised observation at a time.
///
/// For a GARCH source `σ_t` depends only on data up to `t - 1`, so
/// [`VolatilityTrack::next_sigma`] is known before the next value arrives.
/// Out-of-sample rolling fallbacks use a trailing window that ends at the
/// newly pushed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityTrack {
    state: TrackState,
    sigma: Vec<f64>,
}

impl VolatilityTrack {
    /// Builds the in-sample track over the same `values` the source was fitted on.
    pub fn new(source: &VolatilitySource, values: &[f64]) -> Self {
        match source {
            VolatilitySource::Garch { fit, differenced } => {
                let mut sigma: Vec<f64> = fit.sigma2_path.iter().map(|s| s.sqrt()).collect();
                if *differenced {
                    let first = sigma.first().copied().unwrap_or(0.0);
                    sigma.insert(0, first);
                }
                Self {
                    state: TrackState::Garch {
                        fit: fit.clone(),
                        differenced: *differenced,
                        last_level: values.last().copied().unwrap_or(0.0),
                    },
                    sigma,
                }
            }
            VolatilitySource::RollingStd { window, .. } => Self {
                sigma: rolling_std_centered(values, *window),
                state: TrackState::Rolling {
                    window: *window,
                    levels: values.to_vec(),
                },
            },
        }
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Volatility for the next, not yet observed, slot. For rolling tracks
    /// this is the trailing deviation of the most recent window.
    pub fn next_sigma(&self) -> f64 {
        match &self.state {
            TrackState::Garch { fit, .. } => {
                next_variance(&fit.params, &fit.residuals, &fit.sigma2_path, fit.presample).sqrt()
            }
            TrackState::Rolling { window, levels } => {
                let lo = levels.len().saturating_sub(*window);
                population_std(&levels[lo..])
            }
        }
    }

    /// Appends the realised level of the next slot.
    pub fn push(&mut self, value: f64) {
        match &mut self.state {
            TrackState::Garch {
                fit,
                differenced,
                last_level,
            } => {
                let s2 = next_variance(&fit.params, &fit.residuals, &fit.sigma2_path, fit.presample);
                let shock = if *differenced { value - *last_level } else { value };
                fit.residuals.push(shock - fit.mean);
                fit.sigma2_path.push(s2);
                *last_level = value;
                self.sigma.push(s2.sqrt());
            }
            TrackState::Rolling { window, levels } => {
                levels.push(value);
                let lo = levels.len().saturating_sub(*window);
                self.sigma.push(population_std(&levels[lo..]));
            }
        }
    }
}
