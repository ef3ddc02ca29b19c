use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::svm::Standardizer;

use super::calendar::time_features;
use super::{DataError, LoadSeries, TIMESTAMP_FORMAT};

/// Lag structure of the predictor inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    /// 1: each load sees only its own lags. 2 and 3: every load sees all lags.
    pub variant: u8,
    /// Current-day lags h, h-1, …, h-s.
    pub s: usize,
    /// Previous days contributing the pair (h-24j, h-24j+1).
    pub d: usize,
}

impl FeatureConfig {
    /// Standard lag settings of each variant.
    pub fn variant(v: u8) -> Result<Self, DataError> {
        match v {
            1 | 2 => Ok(Self { variant: v, s: 3, d: 2 }),
            3 => Ok(Self { variant: 3, s: 4, d: 3 }),
            _ => Err(DataError::Invalid(format!("variant must be 1, 2 or 3, got {v}"))),
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(1..=3).contains(&self.variant) {
            return Err(DataError::Invalid(format!("variant must be 1, 2 or 3, got {}", self.variant)));
        }
        Ok(())
    }

    /// Lag features per load.
    pub fn n_f(&self) -> usize {
        self.s + 1 + 2 * self.d
    }

    /// Index of the first hour that has a full lag window.
    pub fn warmup(&self) -> usize {
        self.s.max(24 * self.d)
    }

    /// Hour offsets (h - offset) of one load's lag block, in column order.
    pub fn lags(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..=self.s).collect();
        for j in (1..=self.d).rev() {
            out.push(24 * j);
            out.push(24 * j - 1);
        }
        out
    }
}

/// Standardization statistics of the training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub x: Standardizer<f64>,
    pub y: Standardizer<f64>,
}

/// One row per hour h: `[mo, wd, hr]` of h followed by every load's lag block; the
/// targets are the loads at h+1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub config: FeatureConfig,
    pub loads: Vec<String>,
    /// Wall-clock time of hour h.
    pub timestamps: Vec<NaiveDateTime>,
    /// Series row of hour h.
    pub series_rows: Vec<usize>,
    /// `3 + n_l * n_f` columns regardless of the variant.
    pub x: Matrix<f64>,
    pub y: Matrix<f64>,
    /// Present once the dataset has been standardized.
    pub scaling: Option<Scaling>,
}

pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl FeatureDataset {
    pub fn build(series: &LoadSeries, config: FeatureConfig) -> Result<Self, DataError> {
        config.validate()?;
        let n = series.len();
        let start = config.warmup();
        if n < start + 2 {
            return Err(DataError::InsufficientHistory { needed: start + 2, have: n });
        }
        let lags = config.lags();
        let n_l = series.n_cols();
        let p = 3 + n_l * lags.len();
        let m = n - 1 - start;
        let mut x = Matrix::zeros(m, p);
        let mut y = Matrix::zeros(m, n_l);
        for (r, h) in (start..n - 1).enumerate() {
            let row = x.row_mut(r);
            row[..3].copy_from_slice(&time_features(series.timestamps[h]));
            let mut c = 3;
            for i in 0..n_l {
                for &lag in &lags {
                    row[c] = series.values[(h - lag, i)];
                    c += 1;
                }
            }
            y.row_mut(r).copy_from_slice(series.row(h + 1));
        }
        Ok(Self {
            config,
            loads: series.columns.clone(),
            timestamps: series.timestamps[start..n - 1].to_vec(),
            series_rows: (start..n - 1).collect(),
            x,
            y,
            scaling: None,
        })
    }

    pub fn m(&self) -> usize {
        self.x.rows()
    }

    pub fn n_loads(&self) -> usize {
        self.loads.len()
    }

    /// Inputs seen by one load's model.
    pub fn p(&self) -> usize {
        match self.config.variant {
            1 => 3 + self.config.n_f(),
            _ => self.x.cols(),
        }
    }

    /// Columns of `x` forming the input of load `i`.
    pub fn design_columns(&self, i: usize) -> Vec<usize> {
        match self.config.variant {
            1 => {
                let n_f = self.config.n_f();
                (0..3).chain(3 + i * n_f..3 + (i + 1) * n_f).collect()
            }
            _ => (0..self.x.cols()).collect(),
        }
    }

    /// Column names of `x`.
    pub fn x_columns(&self) -> Vec<String> {
        let mut out = vec!["mo".to_string(), "wd".to_string(), "hr".to_string()];
        let lags = self.config.lags();
        for l in &self.loads {
            out.extend(lags.iter().map(|k| format!("{l}_lag{k}")));
        }
        out
    }

    /// Scales with statistics of `train` rows; refuses an already scaled dataset.
    pub fn standardize(&self, train: &[usize]) -> Result<Self, DataError> {
        if self.scaling.is_some() {
            return Err(DataError::Invalid("dataset is already standardized".into()));
        }
        let sx = Standardizer::fit(&self.x, Some(train)).ok_or(DataError::EmptySplit("train"))?;
        let sy = Standardizer::fit(&self.y, Some(train)).ok_or(DataError::EmptySplit("train"))?;
        let names = self.x_columns();
        for &j in &sx.constant {
            log::warn!("feature column {} is constant on the training rows", names[j]);
        }
        for &j in &sy.constant {
            log::warn!("target column {} is constant on the training rows", self.loads[j]);
        }
        Ok(self.with_scaling(Scaling { x: sx, y: sy }))
    }

    /// Applies given statistics to an unscaled dataset.
    pub fn with_scaling(&self, scaling: Scaling) -> Self {
        Self {
            x: scaling.x.apply(&self.x),
            y: scaling.y.apply(&self.y),
            scaling: Some(scaling),
            ..self.clone()
        }
    }

    pub fn unstandardize(&self) -> Self {
        match &self.scaling {
            None => self.clone(),
            Some(s) => Self { x: s.x.invert(&self.x), y: s.y.invert(&self.y), scaling: None, ..self.clone() },
        }
    }

    /// Rows of one load's design matrix.
    pub fn design(&self, i: usize, rows: &[usize]) -> Matrix<f64> {
        self.x.select(rows, &self.design_columns(i))
    }

    /// Writes `X.csv`, `Y.csv` and `features.json` into `dir`.
    pub fn write_cache(&self, dir: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir).map_err(|e| DataError::Io { path: dir.to_path_buf(), source: e })?;
        write_matrix(&dir.join("X.csv"), &self.timestamps, &self.x_columns(), &self.x)?;
        write_matrix(&dir.join("Y.csv"), &self.timestamps, &self.loads, &self.y)?;
        let side = Sidecar {
            config: self.config,
            loads: self.loads.clone(),
            first: self.timestamps.first().copied(),
            last: self.timestamps.last().copied(),
            series_rows: self.series_rows.clone(),
            scaling: self.scaling.clone(),
        };
        let path = dir.join("features.json");
        let text = serde_json::to_string_pretty(&side).map_err(|e| DataError::Cache(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| DataError::Io { path, source: e })
    }

    pub fn read_cache(dir: &Path) -> Result<Self, DataError> {
        let path = dir.join("features.json");
        let text = std::fs::read_to_string(&path).map_err(|e| DataError::Io { path: path.clone(), source: e })?;
        let side: Sidecar = serde_json::from_str(&text).map_err(|e| DataError::Cache(e.to_string()))?;
        let (ts, x) = read_matrix(&dir.join("X.csv"))?;
        let (ty, y) = read_matrix(&dir.join("Y.csv"))?;
        if ts != ty || ts.len() != side.series_rows.len() || y.cols() != side.loads.len() {
            return Err(DataError::Cache("X.csv, Y.csv and features.json disagree".into()));
        }
        if ts.first().copied() != side.first || ts.last().copied() != side.last {
            return Err(DataError::Cache("time range differs from features.json".into()));
        }
        Ok(Self {
            config: side.config,
            loads: side.loads,
            timestamps: ts,
            series_rows: side.series_rows,
            x,
            y,
            scaling: side.scaling,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: FeatureConfig,
    loads: Vec<String>,
    first: Option<NaiveDateTime>,
    last: Option<NaiveDateTime>,
    series_rows: Vec<usize>,
    scaling: Option<Scaling>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |e| DataError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) }
}

fn write_matrix(path: &Path, ts: &[NaiveDateTime], names: &[String], m: &Matrix<f64>) -> Result<(), DataError> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    let mut header = vec!["datetime".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(&err)?;
    let mut rec = Vec::with_capacity(names.len() + 1);
    for (i, t) in ts.iter().enumerate() {
        rec.clear();
        rec.push(t.format(TIMESTAMP_FORMAT).to_string());
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| DataError::Io { path: path.to_path_buf(), source: e })
}

fn read_matrix(path: &Path) -> Result<(Vec<NaiveDateTime>, Matrix<f64>), DataError> {
    let err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let cols = r.headers().map_err(&err)?.len().saturating_sub(1);
    let mut ts = Vec::new();
    let mut m = Matrix::zeros(0, cols);
    let mut row = Vec::with_capacity(cols);
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(&err)?;
        let bad = |message: String| DataError::Parse { path: path.to_path_buf(), line: k as u64 + 2, message };
        let t = NaiveDateTime::parse_from_str(&rec[0], TIMESTAMP_FORMAT).map_err(|e| bad(e.to_string()))?;
        row.clear();
        for f in rec.iter().skip(1) {
            row.push(f.parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}")))?);
        }
        if row.len() != cols {
            return Err(bad(format!("{} values, expected {cols}", row.len())));
        }
        ts.push(t);
        m.push_row(&row);
    }
    Ok((ts, m))
}

/// Rows whose hour h is strictly before `boundary` train; the rest test.
pub fn chronological_split(ds: &FeatureDataset, boundary: NaiveDateTime) -> Result<Split, DataError> {
    let cut = ds.timestamps.partition_point(|&t| t < boundary);
    if cut == 0 {
        return Err(DataError::EmptySplit("train"));
    }
    if cut == ds.m() {
        return Err(DataError::EmptySplit("test"));
    }
    Ok(Split { train: (0..cut).collect(), test: (cut..ds.m()).collect() })
}
