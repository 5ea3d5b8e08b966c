//! Run configuration files.
//!
//! A file is a TOML document with a handful of top-level keys and four
//! sections (`[vmd]`, `[garch]`, `[network]`, `[train]`). Every key is
//! optional and defaults to the reference protocol; unknown keys are errors.

use std::path::{Path, PathBuf};

use modecast_core::garch::{FitOptions, GarchSpec, VolatilityOptions};
use modecast_core::neural::{CellKind, NetworkConfig, TrainConfig};
use modecast_core::pipeline::{PipelineConfig, Variant};
use modecast_core::series::SplitSpec;
use modecast_core::vmd::{OmegaInit, VmdConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path} not found")]
    NotFound { path: PathBuf },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("config key `{key}`: {reason}")]
    Key { key: String, reason: String },
}

fn key_error(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Key {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Number of VMD modes K.
    pub modes: usize,
    /// Training fraction.
    pub split: f64,
    pub horizons: Vec<usize>,
    /// Cell kinds used by `compare`.
    pub cells: Vec<String>,
    /// Variant used by `train` and `forecast`.
    pub variant: String,
    pub retrain_every: usize,
    pub cache_dir: Option<String>,
    pub vmd: VmdSection,
    pub garch: GarchSection,
    pub network: NetworkSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VmdSection {
    pub alpha: f64,
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// `uniform`, `zero` or `random:<seed>`.
    pub init_omega: String,
    pub mirror_extend: bool,
    pub dc_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GarchSection {
    pub k: usize,
    pub l: usize,
    pub restarts: usize,
    pub max_evals: usize,
    pub adf_lags: usize,
    pub fallback_window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub cell: String,
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub seq_len: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    /// Gradient-norm ceiling; 0 disables clipping.
    pub clip: f64,
}

fn omega_name(init: OmegaInit) -> String {
    match init {
        OmegaInit::Uniform => "uniform".into(),
        OmegaInit::Zero => "zero".into(),
        OmegaInit::Random(seed) => format!("random:{seed}"),
    }
}

fn parse_omega(s: &str) -> Option<OmegaInit> {
    match s.to_ascii_lowercase().as_str() {
        "uniform" => Some(OmegaInit::Uniform),
        "zero" => Some(OmegaInit::Zero),
        other => other.strip_prefix("random:")?.parse().ok().map(OmegaInit::Random),
    }
}

impl RunConfig {
    /// The file form of a pipeline configuration plus run-level settings.
    pub fn from_pipeline(p: &PipelineConfig, horizons: Vec<usize>) -> Self {
        Self {
            modes: p.vmd.modes,
            split: p.split.train_fraction,
            horizons,
            cells: CellKind::ALL.iter().map(|c| c.name().to_string()).collect(),
            variant: Variant::VmdGarchNn.to_string(),
            retrain_every: p.retrain_every,
            cache_dir: None,
            vmd: VmdSection {
                alpha: p.vmd.alpha,
                tau: p.vmd.tau,
                tol: p.vmd.tol,
                max_iter: p.vmd.max_iter,
                init_omega: omega_name(p.vmd.init_omega),
                mirror_extend: p.vmd.mirror_extend,
                dc_mode: p.vmd.dc_mode,
            },
            garch: GarchSection {
                k: p.volatility.spec.arch,
                l: p.volatility.spec.garch,
                restarts: p.volatility.fit.restarts,
                max_evals: p.volatility.fit.simplex.max_evals,
                adf_lags: p.volatility.adf_lags,
                fallback_window: p.volatility.fallback_window,
            },
            network: NetworkSection {
                cell: p.network.cell.name().to_string(),
                layers: p.network.layers,
                hidden: p.network.hidden,
                dropout: p.network.dropout_rate,
                seq_len: p.seq_len,
                seed: p.network.seed,
            },
            train: TrainSection {
                epochs: p.train.epochs,
                batch: p.train.batch_size,
                lr: p.train.lr,
                seed: p.train.seed,
                clip: p.train.clip_norm.unwrap_or(0.0),
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut key = e.path().to_string();
            let reason = e.inner().message().to_string();
            if key == "." {
                if let Some(field) = reason.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
                    key = field.to_string();
                }
            }
            ConfigError::Key { key, reason }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ConfigError::NotFound { path: path.to_path_buf() },
            _ => ConfigError::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn cell(&self) -> Result<CellKind, ConfigError> {
        self.network
            .cell
            .parse()
            .map_err(|_| key_error("network.cell", format!("unknown cell {:?} (rnn, gru, lstm)", self.network.cell)))
    }

    pub fn cell_list(&self) -> Result<Vec<CellKind>, ConfigError> {
        if self.cells.is_empty() {
            return Err(key_error("cells", "must list at least one cell"));
        }
        self.cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.parse()
                    .map_err(|_| key_error(&format!("cells[{i}]"), format!("unknown cell {c:?} (rnn, gru, lstm)")))
            })
            .collect()
    }

    pub fn variant(&self) -> Result<Variant, ConfigError> {
        self.variant.parse().map_err(|_| {
            key_error(
                "variant",
                format!("unknown variant {:?} (nn_only, vmd_nn, vmd_garch_nn)", self.variant),
            )
        })
    }

    /// Checks every key and builds the pipeline configuration.
    pub fn to_pipeline(&self) -> Result<PipelineConfig, ConfigError> {
        let positive = |key: &str, v: usize| {
            if v == 0 {
                Err(key_error(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("modes", self.modes)?;
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(key_error("split", format!("{} is not strictly between 0 and 1", self.split)));
        }
        if let Some(i) = self.horizons.iter().position(|h| *h == 0) {
            return Err(key_error(&format!("horizons[{i}]"), "must be at least 1"));
        }
        self.cell_list()?;
        self.variant()?;

        let v = &self.vmd;
        if !(v.alpha > 0.0 && v.alpha.is_finite()) {
            return Err(key_error("vmd.alpha", "must be positive"));
        }
        if !(v.tau >= 0.0 && v.tau.is_finite()) {
            return Err(key_error("vmd.tau", "must be non-negative"));
        }
        if !(v.tol > 0.0 && v.tol.is_finite()) {
            return Err(key_error("vmd.tol", "must be positive"));
        }
        positive("vmd.max_iter", v.max_iter)?;
        let init_omega = parse_omega(&v.init_omega)
            .ok_or_else(|| key_error("vmd.init_omega", "expected uniform, zero or random:<seed>"))?;

        let g = &self.garch;
        if g.k == 0 && g.l == 0 {
            return Err(key_error("garch.k", "k and l cannot both be 0"));
        }
        positive("garch.max_evals", g.max_evals)?;
        positive("garch.fallback_window", g.fallback_window)?;

        let n = &self.network;
        let cell = self.cell()?;
        positive("network.layers", n.layers)?;
        positive("network.hidden", n.hidden)?;
        positive("network.seq_len", n.seq_len)?;
        if !(0.0..1.0).contains(&n.dropout) {
            return Err(key_error("network.dropout", "must lie in [0, 1)"));
        }

        let t = &self.train;
        positive("train.batch", t.batch)?;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(key_error("train.lr", "must be positive"));
        }
        if !(t.clip >= 0.0 && t.clip.is_finite()) {
            return Err(key_error("train.clip", "must be non-negative (0 disables clipping)"));
        }

        let defaults = PipelineConfig::default();
        let config = PipelineConfig {
            vmd: VmdConfig {
                modes: self.modes,
                alpha: v.alpha,
                tau: v.tau,
                tol: v.tol,
                max_iter: v.max_iter,
                init_omega,
                mirror_extend: v.mirror_extend,
                dc_mode: v.dc_mode,
            },
            volatility: VolatilityOptions {
                spec: GarchSpec { arch: g.k, garch: g.l },
                fit: FitOptions {
                    simplex: modecast_core::garch::optim::SimplexOptions {
                        max_evals: g.max_evals,
                        ..defaults.volatility.fit.simplex
                    },
                    restarts: g.restarts,
                },
                adf_lags: g.adf_lags,
                fallback_window: g.fallback_window,
            },
            network: NetworkConfig {
                cell,
                layers: n.layers,
                hidden: n.hidden,
                input_features: defaults.network.input_features,
                dropout_rate: n.dropout,
                seed: n.seed,
            },
            train: TrainConfig {
                epochs: t.epochs,
                batch_size: t.batch,
                lr: t.lr,
                seed: t.seed,
                clip_norm: (t.clip > 0.0).then_some(t.clip),
            },
            seq_len: n.seq_len,
            split: SplitSpec::new(self.split).map_err(|e| key_error("split", e.to_string()))?,
            retrain_every: self.retrain_every,
        };
        config
            .validate()
            .map_err(|e| key_error("(configuration)", e.to_string()))?;
        Ok(config)
    }
}

impl Default for RunConfig {
    /// The reference protocol with horizons 10 and 20..70.
    fn default() -> Self {
        Self::from_pipeline(&PipelineConfig::default(), vec![10, 20, 30, 40, 50, 60, 70])
    }
}

macro_rules! section_defaults {
    ($($ty:ident => $field:ident),*) => {$(
        impl Default for $ty {
            fn default() -> Self {
                RunConfig::default().$field
            }
        }
    )*};
}
section_defaults!(VmdSection => vmd, GarchSection => garch, NetworkSection => network, TrainSection => train);
