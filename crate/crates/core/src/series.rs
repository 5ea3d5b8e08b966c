//! Time-series containers, validation, train/test splitting and min-max scaling.
//!
//! Every algorithm in the crate works on index positions; timestamps ride along
//! as metadata so that files can be written back out with their dates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Calendar date carried alongside an observation (`YYYY-MM-DD`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Date {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

impl Date {
    pub fn new(year: i32, month: u8, day: u8) -> Self {
        Self { year, month, day }
    }
}

impl std::fmt::Display for Date {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series contains a non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("series too short: length {len}, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("timestamps are not strictly increasing at index {index}")]
    NonMonotonicTimestamps { index: usize },
    #[error("timestamp count {timestamps} does not match value count {values}")]
    TimestampLength { values: usize, timestamps: usize },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("constant series cannot be min-max scaled (value {0})")]
    ConstantSeries(f64),
}

/// An ordered series of finite observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    values: Vec<f64>,
    timestamps: Option<Vec<Date>>,
}

impl TimeSeries {
    /// Builds and validates a series without timestamps.
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self, SeriesError> {
        validate(Self {
            name: name.into(),
            values,
            timestamps: None,
        })
    }

    pub fn with_timestamps(
        name: impl Into<String>,
        values: Vec<f64>,
        timestamps: Vec<Date>,
    ) -> Result<Self, SeriesError> {
        validate(Self {
            name: name.into(),
            values,
            timestamps: Some(timestamps),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[Date]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Copies `range` into a new series; the slice is not revalidated for length.
    fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            name: self.name.clone(),
            values: self.values[range.clone()].to_vec(),
            timestamps: self.timestamps.as_ref().map(|t| t[range].to_vec()),
        }
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Checks every [`TimeSeries`] invariant and hands the series back untouched.
pub fn validate(series: TimeSeries) -> Result<TimeSeries, SeriesError> {
    if let Some(index) = series.values.iter().position(|v| !v.is_finite()) {
        return Err(SeriesError::NonFinite { index });
    }
    if series.values.len() < 2 {
        return Err(SeriesError::TooShort {
            len: series.values.len(),
            min: 2,
        });
    }
    if let Some(ts) = &series.timestamps {
        if ts.len() != series.values.len() {
            return Err(SeriesError::TimestampLength {
                values: series.values.len(),
                timestamps: ts.len(),
            });
        }
        if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SeriesError::NonMonotonicTimestamps { index: i + 1 });
        }
    }
    Ok(series)
}

/// Fraction of observations assigned to the training side of a split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.85,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self, SeriesError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(SeriesError::InvalidFraction(train_fraction));
        }
        Ok(Self { train_fraction })
    }

    /// Index of the first test observation for a series of length `len`.
    pub fn split_index(&self, len: usize) -> Result<usize, SeriesError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(SeriesError::InvalidFraction(self.train_fraction));
        }
        let idx = (self.train_fraction * len as f64).floor() as usize;
        if idx == 0 || idx >= len {
            return Err(SeriesError::TooShort { len, min: 2 });
        }
        Ok(idx)
    }
}

/// Splits by index: the first `floor(fraction * T)` points train, the rest test.
pub fn split(series: &TimeSeries, spec: SplitSpec) -> Result<(TimeSeries, TimeSeries), SeriesError> {
    let idx = spec.split_index(series.len())?;
    Ok((series.slice(0..idx), series.slice(idx..series.len())))
}

/// Affine map of the training range onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    lo: f64,
    hi: f64,
}

impl MinMaxScaler {
    /// Learns bounds from training data only.
    pub fn fit(train: &[f64]) -> Result<Self, SeriesError> {
        if train.is_empty() {
            return Err(SeriesError::TooShort { len: 0, min: 1 });
        }
        if let Some(index) = train.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { index });
        }
        let lo = train.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::from_bounds(lo, hi)
    }

    pub fn from_bounds(lo: f64, hi: f64) -> Result<Self, SeriesError> {
        if !(hi > lo) {
            return Err(SeriesError::ConstantSeries(lo));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.lo) / (self.hi - self.lo)
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * (self.hi - self.lo) + self.lo
    }

    pub fn apply_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }

    pub fn invert_all(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.invert(y)).collect()
    }
}
