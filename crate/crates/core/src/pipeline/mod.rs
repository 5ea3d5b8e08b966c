//! Decompose, attach volatility, train one network per component, forecast
//! one step at a time and sum the component forecasts.
//!
//! The series is decomposed once over its full length and the resulting modes
//! are split into training and test parts. The test part of each mode is
//! therefore shaped by data it will later be asked to forecast; scalers,
//! volatility models and networks only ever see the training part.

mod benchmark;
mod compare;
mod forecaster;
mod metrics;
mod windows;

pub use benchmark::{synthetic_benchmark, BenchmarkSpec};
pub use compare::{compare_models, Comparison, ComparisonRow, ModelRun};
pub use forecaster::{
    decompose_series, extract_mode_volatility, fit_forecaster, fit_prepared, rolling_forecast, Component,
    EnsembleForecaster, ModeModel, Prepared, RollingForecast, VolChannel,
};
pub use metrics::{aggregate, mape, metrics, EvalReport};
pub use windows::{build_windows, window_at, WindowedDataset};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::garch::{optim::SimplexOptions, FitOptions, GarchError, GarchSpec, VolatilityOptions};
use crate::neural::{CellKind, NetworkConfig, NeuralError, TrainConfig};
use crate::series::{SeriesError, SplitSpec};
use crate::vmd::{VmdConfig, VmdError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Vmd(#[from] VmdError),
    #[error(transparent)]
    Garch(#[from] GarchError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("actual value at index {index} is zero; MAPE is undefined")]
    ZeroActual { index: usize },
    #[error("series of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("{steps} forecast steps requested but only {available} test points exist")]
    HorizonTooLong { steps: usize, available: usize },
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// One network on the raw series, value column duplicated as the second input.
    #[serde(rename = "NN_only")]
    NnOnly,
    /// One network per mode, second input column zero.
    #[serde(rename = "VMD_NN")]
    VmdNn,
    /// One network per mode with its conditional volatility as second input.
    #[serde(rename = "VMD_GARCH_NN")]
    VmdGarchNn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::NnOnly, Variant::VmdNn, Variant::VmdGarchNn];

    pub fn model_name(self, cell: CellKind) -> String {
        match self {
            Self::NnOnly => cell.to_string(),
            Self::VmdNn => format!("VMD-{cell}"),
            Self::VmdGarchNn => format!("VMD-GARCH-{cell}"),
        }
    }

    pub fn channel(self) -> VolChannel {
        match self {
            Self::NnOnly => VolChannel::Duplicate,
            Self::VmdNn => VolChannel::Zero,
            Self::VmdGarchNn => VolChannel::Volatility,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::NnOnly => "NN_only",
            Self::VmdNn => "VMD_NN",
            Self::VmdGarchNn => "VMD_GARCH_NN",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nn_only" | "nn" => Ok(Self::NnOnly),
            "vmd_nn" => Ok(Self::VmdNn),
            "vmd_garch_nn" => Ok(Self::VmdGarchNn),
            _ => Err(PipelineError::InvalidConfig(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub vmd: VmdConfig,
    pub volatility: VolatilityOptions,
    /// `cell` and `input_features` are overridden per model.
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub seq_len: usize,
    pub split: SplitSpec,
    /// Retrain each network every this many rolling steps; 0 never retrains.
    pub retrain_every: usize,
}

impl Default for PipelineConfig {
    /// Reference protocol: ten modes, GARCH(10, 10), two 64-unit layers,
    /// 50-step windows, 85/15 split.
    fn default() -> Self {
        Self {
            vmd: VmdConfig::default(),
            volatility: VolatilityOptions::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            seq_len: 50,
            split: SplitSpec::default(),
            retrain_every: 0,
        }
    }
}

impl PipelineConfig {
    /// Reduced settings that keep the nine-model matrix on the synthetic
    /// benchmark within a few minutes on one core.
    pub fn benchmark() -> Self {
        Self {
            vmd: VmdConfig {
                modes: 6,
                alpha: 100.0,
                ..VmdConfig::default()
            },
            volatility: VolatilityOptions {
                spec: GarchSpec { arch: 1, garch: 1 },
                fit: FitOptions {
                    simplex: SimplexOptions::default(),
                    restarts: 2,
                },
                ..VolatilityOptions::default()
            },
            network: NetworkConfig {
                hidden: 16,
                seed: 7,
                ..NetworkConfig::default()
            },
            train: TrainConfig {
                epochs: 30,
                batch_size: 32,
                lr: 5e-3,
                seed: 11,
                clip_norm: Some(5.0),
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.vmd.validate()?;
        GarchSpec::new(self.volatility.spec.arch, self.volatility.spec.garch)?;
        self.network.validate()?;
        self.train.validate()?;
        SplitSpec::new(self.split.train_fraction)?;
        if self.seq_len == 0 {
            return Err(PipelineError::InvalidConfig("seq_len must be at least 1".into()));
        }
        if self.volatility.fallback_window == 0 {
            return Err(PipelineError::InvalidConfig(
                "volatility fallback window must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
