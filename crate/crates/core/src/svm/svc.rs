use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Real;

use super::smo::{self, Problem, SmoOptions, SmoStats};
use super::{check_rows, KernelCache, KernelSpec, Standardizer, SvmError};

/// Soft-margin binary classifier with labels ±1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SvmModel<T> {
    pub kernel: KernelSpec<T>,
    pub c: T,
    pub support: Matrix<T>,
    pub support_index: Vec<usize>,
    pub labels: Vec<i8>,
    pub beta: Vec<T>,
    pub bias: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Standardizer<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub stats: SmoStats,
}

impl<T: Real> SvmModel<T> {
    pub fn dim(&self) -> usize {
        self.support.cols()
    }

    pub fn decision_unchecked(&self, u: &[T]) -> T {
        let mut f = self.bias;
        for (j, (&b, &v)) in self.beta.iter().zip(&self.labels).enumerate() {
            let k = self.kernel.eval_unchecked(self.support.row(j), u);
            f += if v > 0 { b * k } else { -b * k };
        }
        f
    }
}

/// Label for a decision value; ties go to the attacked class.
#[inline]
pub fn label_of<T: Real>(decision: T) -> i8 {
    if decision >= T::zero() {
        1
    } else {
        -1
    }
}

pub fn train_svm<T: Real>(
    u: &Matrix<T>,
    v: &[i8],
    c: T,
    spec: KernelSpec<T>,
    opts: &SmoOptions<T>,
) -> Result<SvmModel<T>, SvmError> {
    check_rows(u, v.len(), "labels")?;
    spec.validate()?;
    if let Some(&bad) = v.iter().find(|&&l| l != 1 && l != -1) {
        return Err(SvmError::Invalid(format!("label {bad} is not ±1")));
    }
    if !v.contains(&1) {
        return Err(SvmError::SingleClass(-1));
    }
    if !v.contains(&-1) {
        return Err(SvmError::SingleClass(1));
    }
    if !(c > T::zero()) || !c.is_finite() {
        return Err(SvmError::Invalid(format!("penalty must be positive, got {c}")));
    }
    let n = v.len();
    let prob = Problem {
        sample: (0..n).collect(),
        y: v.iter().map(|&l| T::of(l as f64)).collect(),
        p: vec![-T::one(); n],
        upper: vec![c; n],
    };
    let mut cache = KernelCache::new(Arc::new(u.clone()), spec, opts.cache_mb);
    let sol = smo::solve(&mut cache, &prob, opts)?;

    let support_index: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > T::zero()).collect();
    let mut support = Matrix::zeros(0, u.cols());
    for &i in &support_index {
        support.push_row(u.row(i));
    }
    Ok(SvmModel {
        kernel: spec,
        c,
        support,
        labels: support_index.iter().map(|&i| v[i]).collect(),
        beta: support_index.iter().map(|&i| sol.alpha[i]).collect(),
        support_index,
        bias: -sol.rho,
        scaling: None,
        config_hash: None,
        stats: sol.stats,
    })
}

/// Label (+1 attacked, −1 normal) and decision value `Σ v_j β_j Q(u_j, u) + b`.
pub fn svm_predict<T: Real>(model: &SvmModel<T>, u: &[T]) -> Result<(i8, T), SvmError> {
    if u.len() != model.dim() {
        return Err(SvmError::Dimension(format!("model expects {} features, got {}", model.dim(), u.len())));
    }
    let f = model.decision_unchecked(u);
    Ok((label_of(f), f))
}
