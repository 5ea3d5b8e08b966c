use serde::{Deserialize, Serialize};

use crate::neural::{Matrix, Sample};

use super::PipelineError;

/// Sliding windows of `seq_len` steps, each row `[value, volatility]`,
/// paired with the value that follows the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub seq_len: usize,
    pub samples: Vec<Sample>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The `seq_len × 2` input whose last row is index `end - 1`.
pub fn window_at(values: &[f64], vol: &[f64], end: usize, seq_len: usize) -> Matrix {
    let mut data = Vec::with_capacity(2 * seq_len);
    for t in end - seq_len..end {
        data.push(values[t]);
        data.push(vol[t]);
    }
    Matrix::from_vec(seq_len, 2, data).expect("window shape is fixed")
}

pub fn build_windows(values: &[f64], vol: &[f64], seq_len: usize) -> Result<WindowedDataset, PipelineError> {
    if values.len() != vol.len() {
        return Err(PipelineError::LengthMismatch {
            left: values.len(),
            right: vol.len(),
        });
    }
    if seq_len == 0 {
        return Err(PipelineError::InvalidConfig("seq_len must be at least 1".into()));
    }
    if values.len() <= seq_len {
        return Err(PipelineError::TooShort {
            len: values.len(),
            min: seq_len + 1,
        });
    }
    let samples = (seq_len..values.len())
        .map(|end| Sample {
            input: window_at(values, vol, end, seq_len),
            target: values[end],
        })
        .collect();
    Ok(WindowedDataset { seq_len, samples })
}
