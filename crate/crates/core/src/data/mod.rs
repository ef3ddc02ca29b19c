//! Hourly zonal load series: ingestion, synthesis, calendar repair and SVR features.

mod calendar;
mod features;
mod ingest;
mod synth;

pub use calendar::{is_weekend, time_features, Calendar};
pub use features::{chronological_split, FeatureConfig, FeatureDataset, Scaling, Split};
pub use ingest::{ingest_csv, write_wide_csv};
pub use synth::{synth_loads, SynthConfig, DEFAULT_ZONE_MW};

use std::path::PathBuf;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

/// Load index order: zone name and the IEEE 30-bus bus it feeds.
pub const ZONES: [(&str, usize); 20] = [
    ("DOM", 2),
    ("AE", 3),
    ("JC", 4),
    ("CE", 7),
    ("AEP", 8),
    ("DPL", 10),
    ("PS", 12),
    ("DEOK", 14),
    ("PEP", 15),
    ("DAY", 16),
    ("PL", 17),
    ("PN", 18),
    ("PE", 19),
    ("RECO", 20),
    ("ATSI", 21),
    ("DUQ", 23),
    ("BC", 24),
    ("ME", 26),
    ("EKPC", 29),
    ("AP", 30),
];

/// Zone MW to bus MW.
pub const ZONE_SCALE: f64 = 1.308e-3;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M";

pub fn zone_index(name: &str) -> Option<usize> {
    ZONES.iter().position(|(z, _)| z.eq_ignore_ascii_case(name))
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}:{line}: unknown zone {zone:?}")]
    UnknownZone { path: PathBuf, line: u64, zone: String },
    #[error("{path}:{line}: negative load {value} for {zone}")]
    NegativeLoad { path: PathBuf, line: u64, zone: String, value: f64 },
    #[error("zone {0} is missing")]
    MissingZone(String),
    #[error("timestamp {timestamp} occurs {count} times")]
    Duplicate { timestamp: NaiveDateTime, count: usize },
    #[error("{missing} consecutive hours missing after {after}")]
    Gap { after: NaiveDateTime, missing: usize },
    #[error("timestamps out of order at {0}")]
    Unordered(NaiveDateTime),
    #[error("need at least {needed} hours of history, series has {have}")]
    InsufficientHistory { needed: usize, have: usize },
    #[error("split leaves the {0} side empty")]
    EmptySplit(&'static str),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("feature cache: {0}")]
    Cache(String),
}

/// Hourly values, one row per wall-clock hour and one column per zone or load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: Vec<String>,
    pub values: Matrix<f64>,
}

impl LoadSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, columns: Vec<String>, values: Matrix<f64>) -> Result<Self, DataError> {
        if values.rows() != timestamps.len() || values.cols() != columns.len() {
            return Err(DataError::Invalid(format!(
                "{}x{} values for {} timestamps and {} columns",
                values.rows(),
                values.cols(),
                timestamps.len(),
                columns.len()
            )));
        }
        Ok(Self { timestamps, columns, values })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    /// Rows as owned vectors (bus-ordered load vectors after [`map_zones_to_buses`]).
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i).to_vec()).collect()
    }

    /// Strictly increasing wall-clock hours with no missing hour.
    pub fn check_hourly(&self, cal: Calendar) -> Result<(), DataError> {
        for w in self.timestamps.windows(2) {
            if w[1] <= w[0] {
                return Err(DataError::Unordered(w[1]));
            }
            if cal.next_hour(w[0]) != w[1] {
                let mut t = w[0];
                let mut missing = 0;
                while t < w[1] {
                    t = cal.next_hour(t);
                    missing += 1;
                }
                return Err(DataError::Gap { after: w[0], missing: missing - 1 });
            }
        }
        if self.values.as_slice().iter().any(|&v| !(v >= 0.0)) {
            return Err(DataError::Invalid("negative or non-finite load value".into()));
        }
        Ok(())
    }
}

/// Averages repeated hours and fills single missing hours by linear interpolation. The
/// hour skipped at the spring clock change does not exist on the wall clock and is not a gap.
pub fn normalize_calendar(series: &LoadSeries, cal: Calendar) -> Result<LoadSeries, DataError> {
    let n = series.len();
    let cols = series.n_cols();
    let mut ts: Vec<NaiveDateTime> = Vec::with_capacity(n);
    let mut out = Matrix::zeros(0, cols);
    let mut i = 0;
    while i < n {
        let t = series.timestamps[i];
        let mut j = i + 1;
        while j < n && series.timestamps[j] == t {
            j += 1;
        }
        if j - i > 2 {
            return Err(DataError::Duplicate { timestamp: t, count: j - i });
        }
        let row: Vec<f64> = if j - i == 2 {
            if !cal.is_repeated(t) {
                log::warn!("averaging duplicate hour {t} outside the clock change");
            }
            series.row(i).iter().zip(series.row(i + 1)).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            series.row(i).to_vec()
        };
        if let Some(&prev) = ts.last() {
            if t < prev {
                return Err(DataError::Unordered(t));
            }
            let expect = cal.next_hour(prev);
            if t != expect {
                if cal.next_hour(expect) != t {
                    let mut missing = 0;
                    let mut k = prev;
                    while k < t {
                        k = cal.next_hour(k);
                        missing += 1;
                    }
                    return Err(DataError::Gap { after: prev, missing: missing - 1 });
                }
                let before = out.row(out.rows() - 1).to_vec();
                let mid: Vec<f64> = before.iter().zip(&row).map(|(a, b)| 0.5 * (a + b)).collect();
                out.push_row(&mid);
                ts.push(expect);
            }
        }
        out.push_row(&row);
        ts.push(t);
        i = j;
    }
    LoadSeries::new(ts, series.columns.clone(), out)
}

/// Reorders the 20 zones into load-index order and scales MW onto the 30-bus system.
pub fn map_zones_to_buses(series: &LoadSeries) -> Result<LoadSeries, DataError> {
    let mut src = Vec::with_capacity(ZONES.len());
    for (zone, _) in ZONES {
        let j = series
            .columns
            .iter()
            .position(|c| c.eq_ignore_ascii_case(zone))
            .ok_or_else(|| DataError::MissingZone(zone.to_string()))?;
        src.push(j);
    }
    let mut values = Matrix::zeros(0, ZONES.len());
    for i in 0..series.len() {
        let row = series.row(i);
        values.push_row(&src.iter().map(|&j| row[j] * ZONE_SCALE).collect::<Vec<_>>());
    }
    LoadSeries::new(series.timestamps.clone(), ZONES.iter().map(|(z, _)| z.to_string()).collect(), values)
}
