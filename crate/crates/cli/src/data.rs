//! `date,value` CSV files as exported by FRED.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use modecast_core::series::{Date, SeriesError, TimeSeries};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("input file {path} not found")]
    FileNotFound { path: PathBuf },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("line {line}: date is not after the previous row")]
    NonMonotonicTimestamps { line: u64 },
    #[error("series has no dates to write")]
    MissingTimestamps,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

fn parse_error(line: u64, reason: impl Into<String>) -> CsvError {
    CsvError::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn parse_date(s: &str) -> Option<Date> {
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
    Some(Date::new(d.year(), d.month() as u8, d.day() as u8))
}

/// `n` month-start dates beginning at `start`.
pub fn monthly_dates(start: Date, n: usize) -> Vec<Date> {
    (0..n)
        .map(|i| {
            let m = (start.month as i32 - 1) + i as i32;
            Date::new(start.year + m.div_euclid(12), (m.rem_euclid(12) + 1) as u8, start.day)
        })
        .collect()
}

/// Parses CSV text. The header's first column must be `date` (or FRED's
/// `observation_date`), in any case; the second column name becomes the
/// series name. Line numbers in errors are 1-based and count the header.
pub fn parse_csv(text: &str) -> Result<TimeSeries, CsvError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        None => return Err(parse_error(1, "empty file")),
        Some(r) => r.map_err(|e| parse_error(1, e.to_string()))?,
    };
    if header.len() != 2 {
        return Err(parse_error(1, format!("expected 2 header columns, found {}", header.len())));
    }
    let first = header[0].to_ascii_lowercase();
    if first != "date" && first != "observation_date" {
        return Err(parse_error(1, format!("first column must be named date, found {:?}", &header[0])));
    }
    let name = header[1].to_string();

    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut lines = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(parse_error(line, format!("expected 2 columns, found {}", rec.len())));
        }
        let date = parse_date(&rec[0])
            .ok_or_else(|| parse_error(line, format!("invalid date {:?} (want YYYY-MM-DD)", &rec[0])))?;
        let value: f64 = rec[1]
            .parse()
            .map_err(|_| parse_error(line, format!("value {:?} is not a number", &rec[1])))?;
        if !value.is_finite() {
            return Err(parse_error(line, format!("value {:?} is not finite", &rec[1])));
        }
        dates.push(date);
        values.push(value);
        lines.push(line);
    }
    TimeSeries::with_timestamps(name, values, dates).map_err(|e| match e {
        SeriesError::NonMonotonicTimestamps { index } => CsvError::NonMonotonicTimestamps { line: lines[index] },
        other => CsvError::Series(other),
    })
}

pub fn load_csv(path: &Path) -> Result<TimeSeries, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CsvError::FileNotFound { path: path.to_path_buf() },
        _ => CsvError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    parse_csv(&text)
}

/// Writes `date,<name>` rows; values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_csv_to(series: &TimeSeries, mut out: impl Write) -> Result<(), CsvError> {
    let dates = series.timestamps().ok_or(CsvError::MissingTimestamps)?;
    let io = |source| CsvError::Io {
        path: PathBuf::from("<output>"),
        source,
    };
    writeln!(out, "date,{}", series.name()).map_err(io)?;
    for (d, v) in dates.iter().zip(series.values()) {
        writeln!(out, "{d},{v:?}").map_err(io)?;
    }
    Ok(())
}

pub fn write_csv(series: &TimeSeries, path: &Path) -> Result<(), CsvError> {
    let mut buf = Vec::new();
    write_csv_to(series, &mut buf)?;
    std::fs::write(path, buf).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })
}
