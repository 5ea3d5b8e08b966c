use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub mae: f64,
    /// Mean absolute percentage error in percent; `None` when an actual is zero.
    pub mape: Option<f64>,
    pub horizon: usize,
    pub predictions: Vec<f64>,
    pub actuals: Vec<f64>,
}

/// Neumaier-compensated sum.
pub fn aggregate(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check(actual: &[f64], predicted: &[f64]) -> Result<(), PipelineError> {
    if actual.len() != predicted.len() {
        return Err(PipelineError::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    Ok(())
}

/// `100/n · Σ |(x - x̂) / x|`
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, PipelineError> {
    check(actual, predicted)?;
    if let Some(index) = actual.iter().position(|a| *a == 0.0) {
        return Err(PipelineError::ZeroActual { index });
    }
    let terms: Vec<f64> = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| 100.0 * (a - p).abs() / a.abs())
        .collect();
    Ok(aggregate(&terms) / actual.len() as f64)
}

/// RMSE, MAE and (when defined) MAPE over equally long series.
pub fn metrics(actual: &[f64], predicted: &[f64]) -> Result<EvalReport, PipelineError> {
    check(actual, predicted)?;
    let n = actual.len() as f64;
    let abs: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).collect();
    let sq: Vec<f64> = abs.iter().map(|e| e * e).collect();
    let mape = match mape(actual, predicted) {
        Ok(m) => Some(m),
        Err(PipelineError::ZeroActual { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        rmse: (aggregate(&sq) / n).sqrt(),
        mae: aggregate(&abs) / n,
        mape,
        horizon: actual.len(),
        predictions: predicted.to_vec(),
        actuals: actual.to_vec(),
    })
}
