//! Synthetic benchmark series: linear trend, two tones and GARCH(1,1) noise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::garch::{simulate, GarchParams};
use crate::series::TimeSeries;

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub len: usize,
    pub seed: u64,
    pub level: f64,
    pub slope: f64,
    /// `(frequency in cycles/sample, amplitude, phase)`
    pub tones: Vec<(f64, f64, f64)>,
    pub noise: GarchParams,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            len: 800,
            seed: 20_240_601,
            level: 100.0,
            slope: 0.05,
            tones: vec![(0.02, 3.0, 0.0), (1.0 / 12.0, 1.5, 0.7)],
            noise: GarchParams {
                alpha0: 0.02,
                alphas: vec![0.12],
                betas: vec![0.83],
            },
        }
    }
}

impl BenchmarkSpec {
    pub fn generate(&self) -> Result<TimeSeries, PipelineError> {
        let noise = simulate(&self.noise, self.len, self.seed)?;
        let values = (0..self.len)
            .map(|t| {
                let tf = t as f64;
                let tones: f64 = self
                    .tones
                    .iter()
                    .map(|(f, a, p)| a * (2.0 * PI * f * tf + p).sin())
                    .sum();
                self.level + self.slope * tf + tones + noise[t]
            })
            .collect();
        Ok(TimeSeries::new("synthetic", values)?)
    }
}

/// The committed benchmark series.
pub fn synthetic_benchmark() -> TimeSeries {
    BenchmarkSpec::default()
        .generate()
        .expect("default benchmark parameters are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = synthetic_benchmark();
        assert_eq!(a.len(), 800);
        assert_eq!(a, synthetic_benchmark());
        assert!(a.values().iter().all(|v| *v > 50.0));
    }

    #[test]
    fn trend_dominates_long_run() {
        let a = synthetic_benchmark();
        let head: f64 = a.values()[..100].iter().sum::<f64>() / 100.0;
        let tail: f64 = a.values()[700..].iter().sum::<f64>() / 100.0;
        assert!((tail - head - 0.05 * 700.0).abs() < 3.0, "{head} {tail}");
    }
}
