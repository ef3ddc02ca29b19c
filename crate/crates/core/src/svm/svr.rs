use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Real;

use super::smo::{self, Problem, SmoOptions, SmoStats};
use super::{check_rows, KernelCache, KernelSpec, Standardizer, SvmError};

/// ε-insensitive support vector regressor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SvrModel<T> {
    pub kernel: KernelSpec<T>,
    pub eps: T,
    pub penalty: T,
    /// Training rows with a nonzero coefficient.
    pub support: Matrix<T>,
    /// Index of each support vector among the training rows.
    pub support_index: Vec<usize>,
    /// `α_j - α'_j` per support vector.
    pub coef: Vec<T>,
    pub bias: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Standardizer<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub stats: SmoStats,
}

impl<T: Real> SvrModel<T> {
    pub fn dim(&self) -> usize {
        self.support.cols()
    }

    /// `α` and `α'` recovered from the coefficient differences.
    pub fn alphas(&self) -> (Vec<T>, Vec<T>) {
        let a = self.coef.iter().map(|&c| c.max(T::zero())).collect();
        let b = self.coef.iter().map(|&c| (-c).max(T::zero())).collect();
        (a, b)
    }

    pub fn predict_unchecked(&self, x: &[T]) -> T {
        let mut f = self.bias;
        for (j, &c) in self.coef.iter().enumerate() {
            f += c * self.kernel.eval_unchecked(self.support.row(j), x);
        }
        f
    }
}

pub fn train_svr<T: Real>(
    x: &Matrix<T>,
    y: &[T],
    eps: T,
    penalty: T,
    spec: KernelSpec<T>,
    opts: &SmoOptions<T>,
) -> Result<SvrModel<T>, SvmError> {
    check_rows(x, y.len(), "targets")?;
    spec.validate()?;
    let mut cache = KernelCache::new(Arc::new(x.clone()), spec, opts.cache_mb);
    train_svr_with_cache(&mut cache, y, eps, penalty, opts)
}

/// Trains against an existing cache, so several targets over the same rows share kernel rows.
pub fn train_svr_with_cache<T: Real>(
    cache: &mut KernelCache<T>,
    y: &[T],
    eps: T,
    penalty: T,
    opts: &SmoOptions<T>,
) -> Result<SvrModel<T>, SvmError> {
    let m = cache.len();
    check_rows(cache.data(), y.len(), "targets")?;
    if !(eps >= T::zero()) || !(penalty > T::zero()) || !penalty.is_finite() {
        return Err(SvmError::Invalid(format!("need eps >= 0 and penalty > 0 (eps {eps}, penalty {penalty})")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SvmError::Invalid("non-finite target".into()));
    }
    // variables: α_1..α_m then α'_1..α'_m
    let mut prob = Problem {
        sample: (0..m).chain(0..m).collect(),
        y: vec![T::one(); 2 * m],
        p: vec![T::zero(); 2 * m],
        upper: vec![penalty; 2 * m],
    };
    for i in 0..m {
        prob.y[m + i] = -T::one();
        prob.p[i] = eps - y[i];
        prob.p[m + i] = eps + y[i];
    }
    let sol = smo::solve(cache, &prob, opts)?;

    // at most one of α_j, α'_j is kept; the difference, box and decision function are unchanged
    let diff: Vec<T> = (0..m).map(|i| sol.alpha[i] - sol.alpha[m + i]).collect();
    let support_index: Vec<usize> = (0..m).filter(|&i| diff[i] != T::zero()).collect();
    let coef: Vec<T> = support_index.iter().map(|&i| diff[i]).collect();

    let mut quad = T::zero();
    for (&i, &ci) in support_index.iter().zip(&coef) {
        let row = cache.row(i);
        let wi: T = support_index.iter().zip(&coef).map(|(&k, &ck)| ck * row[k]).sum();
        quad += ci * wi;
    }
    let linear: T = support_index.iter().zip(&coef).map(|(&i, &c)| y[i] * c - eps * c.abs()).sum();
    let stats = SmoStats { dual_objective: (linear - quad * T::of(0.5)).as_f64(), ..sol.stats };

    let mut support = Matrix::zeros(0, cache.data().cols());
    for &i in &support_index {
        support.push_row(cache.data().row(i));
    }
    Ok(SvrModel {
        kernel: *cache.spec(),
        eps,
        penalty,
        support,
        support_index,
        coef,
        bias: -sol.rho,
        scaling: None,
        config_hash: None,
        stats,
    })
}

/// `Σ_j (α_j - α'_j) Q(x_j, x) + b`.
pub fn svr_predict<T: Real>(model: &SvrModel<T>, x: &[T]) -> Result<T, SvmError> {
    if x.len() != model.dim() {
        return Err(SvmError::Dimension(format!("model expects {} features, got {}", model.dim(), x.len())));
    }
    Ok(model.predict_unchecked(x))
}
