//! Resolved jobs, their execution, and run manifests.
//!
//! Every command line is first turned into a [`Job`] holding the input file
//! (with its hash) and the fully resolved configuration. The job is what gets
//! recorded in `manifest.json`, so a rerun executes exactly the same work.

use std::path::{Path, PathBuf};

use log::info;
use modecast_core::garch::diagnose;
use modecast_core::pipeline::{
    compare_models, decompose_series, extract_mode_volatility, fit_forecaster, metrics, rolling_forecast, EvalReport,
    PipelineConfig, PipelineError,
};
use modecast_core::neural::{to_checkpoint_string, TrainReport};
use modecast_core::series::{MinMaxScaler, TimeSeries};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::data::parse_csv;
use crate::report::{
    metrics_json, metrics_table, modes_csv, parse_modes, parse_predictions, predictions_csv, sigma_csv,
    MetricRecord, ModesMeta, VolatilitySummary,
};
use crate::svg::{line_chart, stacked_chart, Line};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: u32 = 1;
/// Lags used for the ARCH-LM diagnostic written by `garch-fit`.
const ARCH_LM_LAGS: usize = 12;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// An input file pinned by content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn pin(path: &Path) -> Result<Self, CliError> {
        let bytes = read(path)?;
        Ok(Self {
            path: std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf()),
            sha256: sha256_hex(&bytes),
        })
    }

    /// Reads the file and checks it still has the pinned content.
    pub fn read_verified(&self) -> Result<String, CliError> {
        let bytes = read(&self.path)?;
        let got = sha256_hex(&bytes);
        if got != self.sha256 {
            return Err(CliError::InputChanged {
                path: self.path.clone(),
                expected: self.sha256.clone(),
                found: got,
            });
        }
        String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{} is not UTF-8", self.path.display())))
    }

    pub fn series(&self) -> Result<TimeSeries, CliError> {
        Ok(parse_csv(&self.read_verified()?)?)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Decompose { input: InputFile, config: RunConfig },
    GarchFit { input: InputFile, config: RunConfig },
    /// Variant and cell come from the configuration.
    Train { input: InputFile, config: RunConfig },
    Forecast { input: InputFile, config: RunConfig, steps: usize },
    /// Horizons and cells come from the configuration.
    Compare { input: InputFile, config: RunConfig },
    Plot {
        predictions: Option<InputFile>,
        modes: Option<InputFile>,
    },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Decompose { .. } => "decompose",
            Self::GarchFit { .. } => "garch-fit",
            Self::Train { .. } => "train",
            Self::Forecast { .. } => "forecast",
            Self::Compare { .. } => "compare",
            Self::Plot { .. } => "plot",
        }
    }

    fn config(&self) -> Option<&RunConfig> {
        match self {
            Self::Decompose { config, .. }
            | Self::GarchFit { config, .. }
            | Self::Train { config, .. }
            | Self::Forecast { config, .. }
            | Self::Compare { config, .. } => Some(config),
            Self::Plot { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub network_init: u64,
    pub training: u64,
    pub vmd_init: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub format: u32,
    pub job: Job,
    pub seeds: Option<Seeds>,
    /// The pipeline configuration the job resolved to.
    pub pipeline: Option<PipelineConfig>,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = read(path)?;
        let m: Manifest = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Usage(format!("{} is not a modecast manifest: {e}", path.display())))?;
        if m.tool != "modecast" || m.format != MANIFEST_FORMAT {
            return Err(CliError::Usage(format!(
                "{} has tool {:?} format {}; expected modecast format {MANIFEST_FORMAT}",
                path.display(),
                m.tool,
                m.format
            )));
        }
        if m.version != env!("CARGO_PKG_VERSION") {
            log::warn!(
                "manifest was written by modecast {} (this is {}); outputs may differ",
                m.version,
                env!("CARGO_PKG_VERSION")
            );
        }
        Ok(m)
    }
}

/// Collects output files and their hashes.
struct OutDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let bytes = contents.as_ref();
        std::fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}

/// What a finished job reports back.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: Manifest,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

fn json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ModeDiagnostics {
    adf_statistic: f64,
    adf_reject_unit_root: bool,
    arch_lm_statistic: f64,
    arch_effects_present: bool,
}

#[derive(Serialize)]
struct GarchModeFile {
    volatility: VolatilitySummary,
    diagnostics: Option<ModeDiagnostics>,
    diagnostics_error: Option<String>,
}

#[derive(Serialize)]
struct ModelFile {
    model: String,
    variant: String,
    cell: String,
    split_index: usize,
    components: Vec<ComponentSummary>,
}

#[derive(Serialize)]
struct ComponentSummary {
    mode: usize,
    checkpoint: String,
    scaler: MinMaxScaler,
    vol_scaler: Option<MinMaxScaler>,
    volatility: Option<VolatilitySummary>,
    train: TrainReport,
}

fn metric_record(model: &str, variant: &str, cell: &str, report: &EvalReport) -> MetricRecord {
    MetricRecord {
        model: model.to_string(),
        cell: cell.to_string(),
        variant: variant.to_string(),
        horizon: report.horizon,
        rmse: report.rmse,
        mae: report.mae,
        mape_percent: report.mape,
    }
}

/// Runs `job`, writing outputs and `manifest.json` under `out`.
pub fn run_job(job: &Job, out: &Path) -> Result<RunOutcome, CliError> {
    let mut dir = OutDir::create(out)?;
    let pipeline = job.config().map(RunConfig::to_pipeline).transpose()?;
    let summary = match (job, &pipeline) {
        (Job::Decompose { input, .. }, Some(p)) => {
            let series = input.series()?;
            let modes = decompose_series(&series, p)?;
            dir.write("modes.csv", modes_csv(&modes))?;
            let meta = ModesMeta::new(&modes);
            dir.write("modes.json", json(&meta))?;
            let omegas: Vec<String> = meta.omegas.iter().map(|w| format!("{w:.5}")).collect();
            format!(
                "{} modes after {} iterations; centre frequencies [{}]",
                meta.modes,
                meta.iterations,
                omegas.join(", ")
            )
        }
        (Job::GarchFit { input, .. }, Some(p)) => {
            let series = input.series()?;
            let split = p.split.split_index(series.len()).map_err(PipelineError::from)?;
            let modes = decompose_series(&series, p)?;
            dir.write("modes.csv", modes_csv(&modes))?;
            dir.write("modes.json", json(&ModesMeta::new(&modes)))?;
            let sources = extract_mode_volatility(&modes, split, p)?;
            let mut lines = Vec::new();
            for (k, (source, mode)) in sources.iter().zip(modes.modes()).enumerate() {
                let train = &mode[..split];
                let (diagnostics, diagnostics_error) = match diagnose(train, p.volatility.adf_lags, ARCH_LM_LAGS) {
                    Ok(d) => (
                        Some(ModeDiagnostics {
                            adf_statistic: d.adf_statistic,
                            adf_reject_unit_root: d.adf_reject_unit_root,
                            arch_lm_statistic: d.arch_lm_statistic,
                            arch_effects_present: d.arch_effects_present,
                        }),
                        None,
                    ),
                    Err(e) => (None, Some(e.to_string())),
                };
                let summary = VolatilitySummary::new(k + 1, source);
                lines.push(format!(
                    "mode {}: {}{}",
                    k + 1,
                    summary.method,
                    summary.persistence.map_or(String::new(), |s| format!(" persistence {s:.4}"))
                ));
                dir.write(
                    &format!("garch/mode_{}.json", k + 1),
                    json(&GarchModeFile {
                        volatility: summary,
                        diagnostics,
                        diagnostics_error,
                    }),
                )?;
                dir.write(&format!("garch/sigma_mode_{}.csv", k + 1), sigma_csv(source, train))?;
            }
            lines.join("\n")
        }
        (Job::Train { input, config }, Some(p)) => {
            let series = input.series()?;
            let (variant, cell) = (config.variant()?, config.cell()?);
            let f = fit_forecaster(&series, variant, cell, p)?;
            let mut components = Vec::new();
            for m in &f.mode_models {
                let checkpoint = format!("checkpoints/mode_{}.ckpt", m.mode_index);
                dir.write(&checkpoint, to_checkpoint_string(&m.network))?;
                components.push(ComponentSummary {
                    mode: m.mode_index,
                    checkpoint,
                    scaler: m.scaler,
                    vol_scaler: m.vol_scaler,
                    volatility: m.volatility.as_ref().map(|v| VolatilitySummary::new(m.mode_index, v)),
                    train: m.train_report.clone(),
                });
            }
            dir.write(
                "model.json",
                json(&ModelFile {
                    model: f.model_name(),
                    variant: variant.to_string(),
                    cell: cell.to_string(),
                    split_index: f.split_index,
                    components,
                }),
            )?;
            let losses: Vec<String> = f
                .mode_models
                .iter()
                .map(|m| format!("{:.3e}", m.train_report.final_loss))
                .collect();
            format!("trained {} ({} networks); final losses [{}]", f.model_name(), f.mode_models.len(), losses.join(", "))
        }
        (Job::Forecast { input, config, steps }, Some(p)) => {
            let series = input.series()?;
            let (variant, cell) = (config.variant()?, config.cell()?);
            let f = fit_forecaster(&series, variant, cell, p)?;
            let fc = rolling_forecast(&f, &series, *steps)?;
            dir.write("predictions.csv", predictions_csv(&fc))?;
            let records = if fc.steps() > 0 {
                let report = metrics(&fc.actuals, &fc.predictions)?;
                vec![metric_record(&f.model_name(), &variant.to_string(), &cell.to_string(), &report)]
            } else {
                Vec::new()
            };
            dir.write("metrics.json", metrics_json(&records))?;
            let table = metrics_table(&records);
            dir.write("metrics.txt", &table)?;
            table
        }
        (Job::Compare { input, config }, Some(p)) => {
            let series = input.series()?;
            let cells = config.cell_list()?;
            let c = compare_models(&series, &config.horizons, &cells, p)?;
            dir.write("modes.csv", modes_csv(&c.modes))?;
            dir.write("modes.json", json(&ModesMeta::new(&c.modes)))?;
            for run in &c.runs {
                dir.write(&format!("predictions/{}.csv", run.model), predictions_csv(&run.forecast))?;
            }
            let records: Vec<MetricRecord> = c.rows.iter().map(MetricRecord::from_row).collect();
            dir.write("metrics.json", metrics_json(&records))?;
            let table = metrics_table(&records);
            dir.write("metrics.txt", &table)?;
            table
        }
        (Job::Plot { predictions, modes }, None) => {
            if predictions.is_none() && modes.is_none() {
                return Err(CliError::Usage("plot needs --predictions and/or --modes".into()));
            }
            let mut made = Vec::new();
            if let Some(p) = predictions {
                let t = parse_predictions(&p.read_verified()?)?;
                let svg = line_chart(
                    "actual vs predicted",
                    &[
                        Line { label: "actual", values: &t.actual },
                        Line { label: "predicted", values: &t.predicted },
                    ],
                );
                dir.write("forecast.svg", svg)?;
                made.push("forecast.svg");
            }
            if let Some(m) = modes {
                let cols = parse_modes(&m.read_verified()?)?;
                let labels: Vec<String> = (1..=cols.len()).map(|k| format!("mode {k}")).collect();
                let lines: Vec<Line> = cols
                    .iter()
                    .zip(&labels)
                    .map(|(c, l)| Line { label: l, values: c })
                    .collect();
                dir.write("modes.svg", stacked_chart(&lines))?;
                made.push("modes.svg");
            }
            format!("wrote {}", made.join(", "))
        }
        _ => unreachable!("configuration presence matches the job kind"),
    };

    let manifest = Manifest {
        tool: "modecast".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        format: MANIFEST_FORMAT,
        job: job.clone(),
        seeds: pipeline.as_ref().map(|p| Seeds {
            network_init: p.network.seed,
            training: p.train.seed,
            vmd_init: format!("{:?}", p.vmd.init_omega),
        }),
        pipeline,
        outputs: dir.files.clone(),
    };
    std::fs::write(out.join(MANIFEST_FILE), json(&manifest)).map_err(|source| CliError::Io {
        path: out.join(MANIFEST_FILE),
        source,
    })?;
    info!("{} finished; outputs in {}", job.name(), out.display());
    Ok(RunOutcome { manifest, summary })
}

/// Re-executes the job recorded in `manifest_path` into `out` and checks
/// every output against the recorded hash.
pub fn rerun(manifest_path: &Path, out: &Path) -> Result<RunOutcome, CliError> {
    let original = Manifest::load(manifest_path)?;
    let outcome = run_job(&original.job, out)?;
    let mismatched: Vec<String> = original
        .outputs
        .iter()
        .filter(|o| !outcome.manifest.outputs.contains(o))
        .map(|o| o.name.clone())
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::RerunMismatch { files: mismatched });
    }
    Ok(RunOutcome {
        summary: format!(
            "{}\nrerun reproduced all {} outputs bit for bit",
            outcome.summary,
            original.outputs.len()
        ),
        ..outcome
    })
}
