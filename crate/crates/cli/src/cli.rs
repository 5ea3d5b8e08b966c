//! Argument parsing and the mapping from command lines to jobs.
//!
//! Settings resolve as command-line flag, then environment variable, then
//! configuration file, then built-in default.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::app::{rerun, run_job, InputFile, Job};
use crate::config::RunConfig;
use crate::fetch::{fetch_series, FetchOptions, CACHE_ENV, DEFAULT_CACHE_DIR, FRED_ENDPOINT};
use crate::{CliError, ExitCode};

#[derive(Debug, Parser)]
#[command(
    name = "modecast",
    version,
    about = "Decomposition-ensemble forecasting: VMD modes, GARCH volatility and recurrent networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Input CSV with a `date,value` header.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Run configuration (TOML); missing keys take reference defaults.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, short, default_value = "modecast-out")]
    pub out: PathBuf,
    /// Number of VMD modes.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Seed for both network initialisation and training.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// nn_only, vmd_nn or vmd_garch_nn.
    #[arg(long)]
    pub variant: Option<String>,
    /// rnn, gru or lstm.
    #[arg(long)]
    pub cell: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download a series from the FRED CSV endpoint into the cache.
    Fetch {
        /// FRED series id, e.g. CPALTT01DEM661S.
        #[arg(long)]
        series: String,
        #[arg(long, default_value = FRED_ENDPOINT)]
        endpoint: String,
        /// Cache directory (overrides MODECAST_CACHE_DIR and the config file).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        /// Reuse cached files younger than this.
        #[arg(long, default_value_t = 24)]
        max_age_hours: u64,
    },
    /// Split the series into VMD modes.
    Decompose(RunArgs),
    /// Decompose, then fit one volatility model per mode.
    GarchFit(RunArgs),
    /// Fit one network per component and write checkpoints.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit, then forecast the test span one step at a time.
    Forecast {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Forecast steps; defaults to the longest configured horizon.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run every variant with every cell kind and tabulate the metrics.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated horizons.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        /// Comma-separated cell kinds.
        #[arg(long, value_delimiter = ',')]
        cells: Option<Vec<String>>,
    },
    /// Draw SVG charts from a predictions file and/or a modes file.
    Plot {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        modes: Option<PathBuf>,
        #[arg(long, short, default_value = "modecast-out")]
        out: PathBuf,
    },
    /// Re-execute the run recorded in a manifest and verify every output.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

/// First present value in precedence order.
pub fn resolve<T>(flag: Option<T>, env: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(env).or(config).unwrap_or(default)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn base_config(run: &RunArgs) -> Result<RunConfig, CliError> {
    let mut c = load_config(run.config.as_deref())?;
    if let Some(m) = run.modes {
        c.modes = m;
    }
    if let Some(s) = run.seed {
        c.network.seed = s;
        c.train.seed = s;
    }
    if let Some(e) = run.epochs {
        c.train.epochs = e;
    }
    Ok(c)
}

fn apply_model(c: &mut RunConfig, model: &ModelArgs) {
    if let Some(v) = &model.variant {
        c.variant = v.clone();
    }
    if let Some(cell) = &model.cell {
        c.network.cell = cell.clone();
    }
}

/// Turns a parsed command line into a job and its output directory.
/// `fetch` and `rerun` are not jobs and return `None`.
pub fn to_job(command: &Command) -> Result<Option<(Job, PathBuf)>, CliError> {
    let job = match command {
        Command::Fetch { .. } | Command::Rerun { .. } => return Ok(None),
        Command::Decompose(run) => (
            Job::Decompose {
                input: InputFile::pin(&run.input)?,
                config: base_config(run)?,
            },
            run.out.clone(),
        ),
        Command::GarchFit(run) => (
            Job::GarchFit {
                input: InputFile::pin(&run.input)?,
                config: base_config(run)?,
            },
            run.out.clone(),
        ),
        Command::Train { run, model } => {
            let mut config = base_config(run)?;
            apply_model(&mut config, model);
            (
                Job::Train {
                    input: InputFile::pin(&run.input)?,
                    config,
                },
                run.out.clone(),
            )
        }
        Command::Forecast { run, model, steps } => {
            let mut config = base_config(run)?;
            apply_model(&mut config, model);
            let steps = match steps.or_else(|| config.horizons.iter().copied().max()) {
                Some(s) => s,
                None => return Err(CliError::Usage("pass --steps or configure horizons".into())),
            };
            (
                Job::Forecast {
                    input: InputFile::pin(&run.input)?,
                    config,
                    steps,
                },
                run.out.clone(),
            )
        }
        Command::Compare { run, horizons, cells } => {
            let mut config = base_config(run)?;
            if let Some(h) = horizons {
                config.horizons = h.clone();
            }
            if let Some(c) = cells {
                config.cells = c.clone();
            }
            if config.horizons.is_empty() {
                return Err(CliError::Usage("compare needs at least one horizon".into()));
            }
            (
                Job::Compare {
                    input: InputFile::pin(&run.input)?,
                    config,
                },
                run.out.clone(),
            )
        }
        Command::Plot { predictions, modes, out } => (
            Job::Plot {
                predictions: predictions.as_deref().map(InputFile::pin).transpose()?,
                modes: modes.as_deref().map(InputFile::pin).transpose()?,
            },
            out.clone(),
        ),
    };
    Ok(Some(job))
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Fetch {
            series,
            endpoint,
            cache_dir,
            config,
            timeout_secs,
            max_age_hours,
        } => {
            let config_dir = match config {
                Some(p) => RunConfig::load(&p)?.cache_dir.map(PathBuf::from),
                None => None,
            };
            let env_dir = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
            let opts = FetchOptions {
                endpoint,
                cache_dir: resolve(cache_dir, env_dir, config_dir, PathBuf::from(DEFAULT_CACHE_DIR)),
                timeout: Duration::from_secs(timeout_secs),
                max_age: Duration::from_secs(max_age_hours * 3600),
            };
            let f = fetch_series(&series, &opts)?;
            let _ = writeln!(
                stdout,
                "{}{}",
                f.path.display(),
                if f.cache_hit { " (cached)" } else { "" }
            );
        }
        Command::Rerun { manifest, out } => {
            let outcome = rerun(&manifest, &out)?;
            let _ = writeln!(stdout, "{}", outcome.summary);
        }
        other => {
            let (job, out) = to_job(&other)?.expect("job commands produce a job");
            let outcome = run_job(&job, &out)?;
            let _ = writeln!(stdout, "{}", outcome.summary.trim_end());
            let _ = writeln!(stdout, "manifest: {}", out.join(crate::app::MANIFEST_FILE).display());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    ExitCode::Success as i32
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    ExitCode::Usage as i32
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => ExitCode::Success as i32,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code() as i32
        }
    }
}
