use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureConfig, FeatureDataset, Scaling};
use crate::linalg::Matrix;
use crate::svm::{train_svr_with_cache, KernelCache, KernelSpec, SmoOptions, SmoStats, SvrModel};

use super::PipelineError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrParams {
    pub eps: f64,
    pub penalty: f64,
    pub sigma: f64,
    pub tol: f64,
    pub max_iter: u64,
    /// Kernel rows are precomputed when they fit in this budget.
    pub cache_mb: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self { eps: 1e-2, penalty: 100.0, sigma: 1e-2, tol: 1e-3, max_iter: 10_000_000, cache_mb: 1024 }
    }
}

impl SvrParams {
    pub fn smo(&self) -> SmoOptions<f64> {
        SmoOptions { tol: self.tol, max_iter: self.max_iter, cache_mb: self.cache_mb }
    }
}

/// One load's regressor; `support` indexes rows of the bundle's support matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadModel {
    pub support: Vec<usize>,
    pub coef: Vec<f64>,
    pub bias: f64,
    pub stats: SmoStats,
}

/// One regressor per load over shared inputs. Support vectors of all loads are stored once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorBundle {
    pub features: FeatureConfig,
    pub params: SvrParams,
    pub loads: Vec<String>,
    pub scaling: Scaling,
    /// Dataset rows the models were trained on.
    pub train_rows: Vec<usize>,
    /// Scaled full-width feature rows.
    pub support: Matrix<f64>,
    /// Dataset row of each support row.
    pub support_rows: Vec<usize>,
    pub models: Vec<LoadModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

fn design_columns(features: &FeatureConfig, width: usize, i: usize) -> Vec<usize> {
    match features.variant {
        1 => {
            let n_f = features.n_f();
            (0..3).chain(3 + i * n_f..3 + (i + 1) * n_f).collect()
        }
        _ => (0..width).collect(),
    }
}

impl PredictorBundle {
    pub fn n_loads(&self) -> usize {
        self.models.len()
    }

    pub fn kernel(&self) -> KernelSpec<f64> {
        KernelSpec::rbf(self.params.sigma)
    }

    /// Input columns of load `i`.
    pub fn columns(&self, i: usize) -> Vec<usize> {
        design_columns(&self.features, self.support.cols(), i)
    }

    /// The regressor of load `i` as a standalone model over its own input columns.
    pub fn model(&self, i: usize) -> SvrModel<f64> {
        let m = &self.models[i];
        let cols = self.columns(i);
        let support = self.support.select(&m.support, &cols);
        SvrModel {
            kernel: self.kernel(),
            eps: self.params.eps,
            penalty: self.params.penalty,
            support,
            support_index: m.support.iter().map(|&k| self.support_rows[k]).collect(),
            coef: m.coef.clone(),
            bias: m.bias,
            scaling: None,
            config_hash: self.config_hash.clone(),
            stats: m.stats.clone(),
        }
    }

    /// Scaled predictions for scaled full-width rows, one column per load.
    pub fn predict_scaled(&self, x: &Matrix<f64>) -> Result<Matrix<f64>, PipelineError> {
        if x.cols() != self.support.cols() {
            return Err(PipelineError::Invalid(format!(
                "bundle expects {} feature columns, got {}",
                self.support.cols(),
                x.cols()
            )));
        }
        let spec = self.kernel();
        let n_l = self.n_loads();
        let shared = self.features.variant != 1;
        let cols: Vec<Vec<usize>> = (0..n_l).map(|i| self.columns(i)).collect();
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|r| {
                let xr = x.row(r);
                if shared {
                    let k: Vec<f64> =
                        (0..self.support.rows()).map(|j| spec.eval_unchecked(self.support.row(j), xr)).collect();
                    self.models
                        .iter()
                        .map(|m| m.bias + m.support.iter().zip(&m.coef).map(|(&j, &c)| c * k[j]).sum::<f64>())
                        .collect()
                } else {
                    self.models
                        .iter()
                        .zip(&cols)
                        .map(|(m, cs)| {
                            let q: Vec<f64> = cs.iter().map(|&c| xr[c]).collect();
                            let mut f = m.bias;
                            for (&j, &c) in m.support.iter().zip(&m.coef) {
                                let s: Vec<f64> = cs.iter().map(|&cc| self.support[(j, cc)]).collect();
                                f += c * spec.eval_unchecked(&s, &q);
                            }
                            f
                        })
                        .collect()
                }
            })
            .collect();
        let mut out = Matrix::zeros(0, n_l);
        for r in rows {
            out.push_row(&r);
        }
        Ok(out)
    }
}

/// Trains one regressor per load on the given rows of a standardized dataset.
pub fn train_predictor(ds: &FeatureDataset, train_rows: &[usize], params: &SvrParams) -> Result<PredictorBundle, PipelineError> {
    let scaling = ds.scaling.clone().ok_or_else(|| PipelineError::Invalid("dataset is not standardized".into()))?;
    if train_rows.is_empty() {
        return Err(PipelineError::Invalid("no training rows".into()));
    }
    let spec = KernelSpec::rbf(params.sigma);
    let opts = params.smo();
    let n_l = ds.n_loads();
    let width = ds.x.cols();
    let m = train_rows.len();
    let fits_in_cache = m * m * 8 <= params.cache_mb << 20;
    let make_cache = |cols: &[usize]| {
        let x = Arc::new(ds.x.select(train_rows, cols));
        if fits_in_cache {
            KernelCache::precomputed(x, spec)
        } else {
            KernelCache::new(x, spec, params.cache_mb)
        }
    };
    let shared = if ds.config.variant != 1 { Some(make_cache(&(0..width).collect::<Vec<_>>())) } else { None };
    let fitted: Vec<Result<SvrModel<f64>, PipelineError>> = (0..n_l)
        .into_par_iter()
        .map(|i| {
            let mut cache = match &shared {
                Some(c) => c.clone(),
                None => make_cache(&design_columns(&ds.config, width, i)),
            };
            let y: Vec<f64> = train_rows.iter().map(|&r| ds.y[(r, i)]).collect();
            train_svr_with_cache(&mut cache, &y, params.eps, params.penalty, &opts)
                .map_err(|source| PipelineError::Svm { load: Some(i), source })
        })
        .collect();
    let fitted: Vec<SvrModel<f64>> = fitted.into_iter().collect::<Result<_, _>>()?;

    let union: Vec<usize> = fitted.iter().flat_map(|f| f.support_index.iter().copied()).collect::<BTreeSet<_>>().into_iter().collect();
    let pos = |k: usize| union.binary_search(&k).expect("support index in union");
    let support_rows: Vec<usize> = union.iter().map(|&k| train_rows[k]).collect();
    let support = ds.x.select(&support_rows, &(0..width).collect::<Vec<_>>());
    let models = fitted
        .into_iter()
        .map(|f| LoadModel {
            support: f.support_index.iter().map(|&k| pos(k)).collect(),
            coef: f.coef,
            bias: f.bias,
            stats: f.stats,
        })
        .collect();
    Ok(PredictorBundle {
        features: ds.config,
        params: params.clone(),
        loads: ds.loads.clone(),
        scaling,
        train_rows: train_rows.to_vec(),
        support,
        support_rows,
        models,
        config_hash: None,
    })
}

/// Predicted loads in MW for dataset rows; the dataset must carry the bundle's scaling.
pub fn predict_loads(bundle: &PredictorBundle, ds: &FeatureDataset, rows: &[usize]) -> Result<Matrix<f64>, PipelineError> {
    match &ds.scaling {
        Some(s) if *s == bundle.scaling => {}
        _ => return Err(PipelineError::Invalid("dataset scaling differs from the predictor's".into())),
    }
    if ds.n_loads() != bundle.n_loads() {
        return Err(PipelineError::Invalid(format!("{} loads in data, {} models", ds.n_loads(), bundle.n_loads())));
    }
    let x = ds.x.select(rows, &(0..ds.x.cols()).collect::<Vec<_>>());
    let scaled = bundle.predict_scaled(&x)?;
    Ok(bundle.scaling.y.invert(&scaled))
}

/// Per-column RMSE (MW) and MAPE (fraction).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: Vec<f64>,
    pub mape: Vec<f64>,
    /// Rows left out of MAPE because the true value was zero.
    pub mape_excluded: Vec<usize>,
}

pub fn metrics_rmse_mape(y: &Matrix<f64>, yhat: &Matrix<f64>) -> Result<Metrics, PipelineError> {
    if y.rows() != yhat.rows() || y.cols() != yhat.cols() {
        return Err(PipelineError::Invalid(format!(
            "shapes differ: {}x{} vs {}x{}",
            y.rows(),
            y.cols(),
            yhat.rows(),
            yhat.cols()
        )));
    }
    if y.rows() == 0 {
        return Err(PipelineError::Invalid("no rows".into()));
    }
    let n = y.rows();
    let mut out = Metrics { rmse: Vec::new(), mape: Vec::new(), mape_excluded: Vec::new() };
    for i in 0..y.cols() {
        let mut se = 0.0;
        let mut ape = 0.0;
        let mut used = 0usize;
        for r in 0..n {
            let e = yhat[(r, i)] - y[(r, i)];
            se += e * e;
            if y[(r, i)] != 0.0 {
                ape += (e / y[(r, i)]).abs();
                used += 1;
            }
        }
        out.rmse.push((se / n as f64).sqrt());
        out.mape.push(if used > 0 { ape / used as f64 } else { f64::NAN });
        out.mape_excluded.push(n - used);
    }
    Ok(out)
}
