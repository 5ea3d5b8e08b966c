use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::garch::VolatilitySource;
use crate::neural::CellKind;
use crate::series::TimeSeries;
use crate::vmd::ModeSet;

use super::forecaster::{
    decompose_series, extract_mode_volatility, fit_prepared, rolling_forecast, Prepared, RollingForecast,
};
use super::metrics::{metrics, EvalReport};
use super::{PipelineConfig, PipelineError, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub variant: Variant,
    pub cell: CellKind,
    pub horizon: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub model: String,
    pub variant: Variant,
    pub cell: CellKind,
    pub forecast: RollingForecast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub runs: Vec<ModelRun>,
    pub modes: ModeSet,
    pub volatility: Vec<VolatilitySource>,
}

impl Comparison {
    pub fn row(&self, variant: Variant, cell: CellKind, horizon: usize) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.cell == cell && r.horizon == horizon)
    }
}

/// Every variant crossed with every cell kind. VMD and GARCH run once and are
/// shared; each model forecasts the longest horizon once and shorter horizons
/// are scored on its prefix. All models use the same seeds.
pub fn compare_models(
    series: &TimeSeries,
    horizons: &[usize],
    cells: &[CellKind],
    config: &PipelineConfig,
) -> Result<Comparison, PipelineError> {
    config.validate()?;
    let split = config.split.split_index(series.len())?;
    let longest = horizons.iter().copied().max().unwrap_or(0);
    if longest > series.len() - split {
        return Err(PipelineError::HorizonTooLong {
            steps: longest,
            available: series.len() - split,
        });
    }
    let modes = decompose_series(series, config)?;
    let volatility = extract_mode_volatility(&modes, split, config)?;
    let prepared = [
        Prepared::nn_only(series, config)?,
        Prepared::from_modes(series, modes.clone(), None, config)?,
        Prepared::from_modes(series, modes.clone(), Some(volatility.clone()), config)?,
    ];
    let jobs: Vec<(&Prepared, CellKind)> = prepared
        .iter()
        .flat_map(|p| cells.iter().map(move |c| (p, *c)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(p, cell)| {
            let f = fit_prepared(p, *cell, config)?;
            Ok(ModelRun {
                model: f.model_name(),
                variant: p.variant,
                cell: *cell,
                forecast: rolling_forecast(&f, series, longest)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let mut rows = Vec::with_capacity(runs.len() * horizons.len());
    for &h in horizons {
        for run in &runs {
            let fc = &run.forecast;
            rows.push(ComparisonRow {
                model: run.model.clone(),
                variant: run.variant,
                cell: run.cell,
                horizon: h,
                report: metrics(&fc.actuals[..h], &fc.predictions[..h])?,
            });
        }
    }
    Ok(Comparison {
        rows,
        runs,
        modes,
        volatility,
    })
}
