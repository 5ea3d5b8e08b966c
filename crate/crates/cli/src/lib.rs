//! Command-line driver for modecast: loads FRED-style CSV series, resolves
//! run configurations, runs the forecasting pipeline and writes predictions,
//! metric reports, manifests and SVG charts.

pub mod app;
pub mod cli;
pub mod config;
pub mod data;
pub mod fetch;
pub mod report;
pub mod svg;

use std::path::PathBuf;

use modecast_core::garch::GarchError;
use modecast_core::neural::NeuralError;
use modecast_core::pipeline::PipelineError;
use modecast_core::vmd::VmdError;
use thiserror::Error;

pub use app::{rerun, run_job, InputFile, Job, Manifest, RunOutcome};
pub use config::{ConfigError, RunConfig};
pub use data::{load_csv, parse_csv, write_csv, CsvError};
pub use fetch::{fetch_series, FetchError, FetchOptions};

/// Process exit status for each error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input {path} changed since the manifest was written (sha256 {expected}, now {found})")]
    InputChanged {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("rerun produced different bytes for: {}", files.join(", "))]
    RerunMismatch { files: Vec<String> },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Usage(_) | Self::Config(_) => ExitCode::Usage,
            Self::Csv(_) | Self::Fetch(_) | Self::Data(_) | Self::Io { .. } | Self::InputChanged { .. } => {
                ExitCode::Data
            }
            Self::RerunMismatch { .. } => ExitCode::Numerical,
            Self::Pipeline(e) => pipeline_exit_code(e),
        }
    }
}

fn pipeline_exit_code(e: &PipelineError) -> ExitCode {
    use ExitCode::*;
    match e {
        PipelineError::InvalidConfig(_) => Usage,
        PipelineError::Series(_)
        | PipelineError::LengthMismatch { .. }
        | PipelineError::EmptyInput
        | PipelineError::ZeroActual { .. }
        | PipelineError::TooShort { .. }
        | PipelineError::HorizonTooLong { .. } => Data,
        PipelineError::Vmd(v) => match v {
            VmdError::InvalidConfig(_) => Usage,
            VmdError::TooShort { .. } | VmdError::Series(_) => Data,
            VmdError::ImaginaryLeakage { .. } => Numerical,
        },
        PipelineError::Garch(g) => match g {
            GarchError::InvalidParams(_) | GarchError::ZeroLags => Usage,
            GarchError::TooShort { .. } | GarchError::DegenerateSeries => Data,
            GarchError::NonFinite(_) | GarchError::SingularRegression => Numerical,
        },
        PipelineError::Neural(n) => match n {
            NeuralError::InvalidConfig(_) => Usage,
            NeuralError::EmptyDataset => Data,
            _ => Numerical,
        },
    }
}
