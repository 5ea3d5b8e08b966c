//! Output file formats. Numbers are written with 17 significant digits so
//! every value parses back to the same `f64`.

use std::fmt::Write;

use modecast_core::garch::{VolatilitySource, VolatilityTrack};
use modecast_core::pipeline::{ComparisonRow, RollingForecast};
use modecast_core::vmd::ModeSet;
use serde::{Deserialize, Serialize};

use crate::data::CsvError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `step,actual,predicted,mode_1..mode_K`; steps are 1-based.
pub fn predictions_csv(forecast: &RollingForecast) -> String {
    let k = forecast.mode_predictions.first().map_or(0, Vec::len);
    let mut out = String::from("step,actual,predicted");
    for m in 1..=k {
        let _ = write!(out, ",mode_{m}");
    }
    out.push('\n');
    for s in 0..forecast.steps() {
        let _ = write!(
            out,
            "{},{},{}",
            s + 1,
            num(forecast.actuals[s]),
            num(forecast.predictions[s])
        );
        for v in &forecast.mode_predictions[s] {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

/// Parsed predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    /// `modes[k][s]`.
    pub modes: Vec<Vec<f64>>,
}

fn parse_row(line: &str, lineno: u64, width: usize) -> Result<Vec<f64>, CsvError> {
    let cells: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
    if cells.len() != width {
        return Err(CsvError::Parse {
            line: lineno,
            reason: format!("expected {width} columns, found {}", cells.len()),
        });
    }
    cells
        .iter()
        .map(|c| {
            c.trim().parse::<f64>().map_err(|_| CsvError::Parse {
                line: lineno,
                reason: format!("{c:?} is not a number"),
            })
        })
        .collect()
}

pub fn parse_predictions(text: &str) -> Result<PredictionTable, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[..3] != ["step", "actual", "predicted"] {
        return Err(CsvError::Parse {
            line: 1,
            reason: "header must start with step,actual,predicted".into(),
        });
    }
    let k = cols.len() - 3;
    let mut t = PredictionTable {
        actual: Vec::new(),
        predicted: Vec::new(),
        modes: vec![Vec::new(); k],
    };
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = parse_row(line, i as u64 + 2, cols.len())?;
        t.actual.push(row[1]);
        t.predicted.push(row[2]);
        for (m, v) in row[3..].iter().enumerate() {
            t.modes[m].push(*v);
        }
    }
    Ok(t)
}

/// `mode_1..mode_K`, one row per time step.
pub fn modes_csv(modes: &ModeSet) -> String {
    let k = modes.len();
    let mut out = (1..=k).map(|m| format!("mode_{m}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for t in 0..modes.signal_len() {
        let row: Vec<String> = modes.modes().iter().map(|m| num(m[t])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Columns of a modes file.
pub fn parse_modes(text: &str) -> Result<Vec<Vec<f64>>, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    let k = header.split(',').count();
    if header.is_empty() || !header.split(',').all(|c| c.starts_with("mode_")) {
        return Err(CsvError::Parse {
            line: 1,
            reason: "header must be mode_1..mode_K".into(),
        });
    }
    let mut cols = vec![Vec::new(); k];
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        for (m, v) in parse_row(line, i as u64 + 2, k)?.into_iter().enumerate() {
            cols[m].push(v);
        }
    }
    Ok(cols)
}

/// Sidecar for a modes file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesMeta {
    pub modes: usize,
    pub signal_len: usize,
    /// Centre frequencies in cycles per sample, ascending.
    pub omegas: Vec<f64>,
    pub iterations: usize,
    pub final_delta: f64,
    /// Largest absolute value of the reconstruction residual.
    pub max_abs_residual: f64,
}

impl ModesMeta {
    pub fn new(modes: &ModeSet) -> Self {
        Self {
            modes: modes.len(),
            signal_len: modes.signal_len(),
            omegas: modes.omegas().to_vec(),
            iterations: modes.iterations(),
            final_delta: modes.final_delta(),
            max_abs_residual: modes.residual().iter().fold(0.0, |a, r| a.max(r.abs())),
        }
    }
}

/// Per-mode volatility summary without the long paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilitySummary {
    pub mode: usize,
    /// `garch` or `rolling_std`.
    pub method: String,
    pub differenced: Option<bool>,
    pub fallback_reason: Option<String>,
    pub window: Option<usize>,
    pub alpha0: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub persistence: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub initial_log_likelihood: Option<f64>,
    pub converged: Option<bool>,
    pub forecast_sigma2: Option<f64>,
}

impl VolatilitySummary {
    pub fn new(mode: usize, source: &VolatilitySource) -> Self {
        let mut s = Self {
            mode,
            method: String::new(),
            differenced: None,
            fallback_reason: None,
            window: None,
            alpha0: None,
            alphas: None,
            betas: None,
            persistence: None,
            log_likelihood: None,
            initial_log_likelihood: None,
            converged: None,
            forecast_sigma2: None,
        };
        match source {
            VolatilitySource::Garch { fit, differenced } => {
                s.method = "garch".into();
                s.differenced = Some(*differenced);
                s.alpha0 = Some(fit.params.alpha0);
                s.alphas = Some(fit.params.alphas.clone());
                s.betas = Some(fit.params.betas.clone());
                s.persistence = Some(fit.params.persistence());
                s.log_likelihood = Some(fit.log_likelihood);
                s.initial_log_likelihood = Some(fit.initial_log_likelihood);
                s.converged = Some(fit.converged);
                s.forecast_sigma2 = Some(fit.forecast_sigma2());
            }
            VolatilitySource::RollingStd { window, reason } => {
                s.method = "rolling_std".into();
                s.window = Some(*window);
                s.fallback_reason = Some(reason.clone());
            }
        }
        s
    }
}

/// `t,sigma` over the training span.
pub fn sigma_csv(source: &VolatilitySource, train: &[f64]) -> String {
    let track = VolatilityTrack::new(source, train);
    let mut out = String::from("t,sigma\n");
    for (t, s) in track.sigma().iter().enumerate() {
        let _ = writeln!(out, "{t},{}", num(*s));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model: String,
    pub cell: String,
    pub variant: String,
    pub horizon: usize,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when an actual value is zero.
    pub mape_percent: Option<f64>,
}

impl MetricRecord {
    pub fn from_row(row: &ComparisonRow) -> Self {
        Self {
            model: row.model.clone(),
            cell: row.cell.to_string(),
            variant: row.variant.to_string(),
            horizon: row.horizon,
            rmse: row.report.rmse,
            mae: row.report.mae,
            mape_percent: row.report.mape,
        }
    }
}

pub fn metrics_json(records: &[MetricRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("metrics serialize");
    s.push('\n');
    s
}

/// Fixed-width table for terminals.
pub fn metrics_table(records: &[MetricRecord]) -> String {
    let width = records.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$}  {:>7}  {:>12}  {:>12}  {:>10}\n",
        "model", "horizon", "rmse", "mae", "mape_%"
    );
    for r in records {
        let mape = r.mape_percent.map_or_else(|| "n/a".to_string(), |m| format!("{m:.4}"));
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>12.6}  {:>12.6}  {:>10}",
            r.model, r.horizon, r.rmse, r.mae, mape
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use modecast_core::pipeline::aggregate;

    fn forecast() -> RollingForecast {
        let mode_predictions = vec![vec![0.1, 0.2, -0.05], vec![1e-10, 100.0, 3.7]];
        RollingForecast {
            start: 10,
            actuals: vec![0.3, 104.0],
            predictions: mode_predictions.iter().map(|m| aggregate(m)).collect(),
            mode_predictions,
        }
    }

    #[test]
    fn predictions_round_trip_bit_exact() {
        let f = forecast();
        let text = predictions_csv(&f);
        assert!(text.starts_with("step,actual,predicted,mode_1,mode_2,mode_3\n"));
        let t = parse_predictions(&text).unwrap();
        assert_eq!(t.actual, f.actuals);
        assert_eq!(t.predicted, f.predictions);
        for s in 0..2 {
            let row: Vec<f64> = t.modes.iter().map(|m| m[s]).collect();
            assert_eq!(row, f.mode_predictions[s]);
            assert_eq!(aggregate(&row).to_bits(), t.predicted[s].to_bits());
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
        for v in [std::f64::consts::PI, 1e-300, -123456.789, 5e-324] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn bad_prediction_files() {
        assert!(parse_predictions("a,b\n").is_err());
        assert!(matches!(
            parse_predictions("step,actual,predicted\n1,2,x\n"),
            Err(CsvError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn table_lists_every_row() {
        let rec = |model: &str, mape| MetricRecord {
            model: model.into(),
            cell: "LSTM".into(),
            variant: "VMD_NN".into(),
            horizon: 10,
            rmse: 1.0,
            mae: 0.5,
            mape_percent: mape,
        };
        let t = metrics_table(&[rec("LSTM", Some(1.0)), rec("VMD-GARCH-LSTM", None)]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("n/a"));
        let json: serde_json::Value = serde_json::from_str(&metrics_json(&[rec("LSTM", None)])).unwrap();
        for key in ["model", "cell", "horizon", "rmse", "mae", "mape_percent"] {
            assert!(json[0].get(key).is_some(), "{key}");
        }
    }
}
