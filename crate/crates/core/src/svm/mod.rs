//! Kernel machines: ε-SVR and C-SVM trained by pairwise coordinate descent on their duals.

mod cache;
mod scaling;
mod smo;
mod svc;
mod svr;

pub use cache::KernelCache;
pub use scaling::Standardizer;
pub use smo::{SmoOptions, SmoStats};
pub use svc::{label_of, svm_predict, train_svm, SvmModel};
pub use svr::{svr_predict, train_svr, train_svr_with_cache, SvrModel};

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum SvmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("training needs both classes; only label {0} present")]
    SingleClass(i8),
    #[error("no convergence after {iterations} pair updates (KKT violation {violation:e})")]
    NotConverged { iterations: u64, violation: f64 },
    #[error("model archive: {0}")]
    Archive(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KernelSpec<T> {
    pub kind: KernelKind,
    /// Width of `exp(-σ‖x - x'‖²)`; ignored by the linear kernel.
    pub sigma: T,
}

impl<T: Real> KernelSpec<T> {
    pub fn rbf(sigma: T) -> Self {
        Self { kind: KernelKind::Rbf, sigma }
    }

    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, sigma: T::zero() }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if self.kind == KernelKind::Rbf && !(self.sigma >= T::zero() && self.sigma.is_finite()) {
            return Err(SvmError::Invalid(format!("rbf sigma must be finite and >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[T], b: &[T]) -> T {
        match self.kind {
            KernelKind::Rbf => {
                let mut d2 = T::zero();
                for (&x, &y) in a.iter().zip(b) {
                    let d = x - y;
                    d2 += d * d;
                }
                (-self.sigma * d2).exp()
            }
            KernelKind::Linear => a.iter().zip(b).map(|(&x, &y)| x * y).sum(),
        }
    }
}

/// Kernel value `Q(x1, x2)`.
pub fn kernel<T: Real>(spec: &KernelSpec<T>, x1: &[T], x2: &[T]) -> Result<T, SvmError> {
    if x1.len() != x2.len() {
        return Err(SvmError::Dimension(format!("{} vs {} features", x1.len(), x2.len())));
    }
    Ok(spec.eval_unchecked(x1, x2))
}

/// Dense kernel matrix over the rows of `x`.
pub fn kernel_matrix<T: Real>(spec: &KernelSpec<T>, x: &Matrix<T>) -> Matrix<T> {
    let m = x.rows();
    let mut k = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = spec.eval_unchecked(x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

pub(crate) fn check_rows<T: Real>(x: &Matrix<T>, n: usize, what: &str) -> Result<(), SvmError> {
    if x.rows() != n {
        return Err(SvmError::Dimension(format!("{} rows but {n} {what}", x.rows())));
    }
    if x.rows() == 0 {
        return Err(SvmError::Invalid("no training rows".into()));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(SvmError::Invalid("non-finite feature value".into()));
    }
    Ok(())
}

pub fn save_json<M: Serialize>(model: &M, path: &Path) -> Result<(), SvmError> {
    let text = serde_json::to_string(model).map_err(|e| SvmError::Archive(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| SvmError::Archive(format!("{}: {e}", path.display())))
}

pub fn load_json<M: DeserializeOwned>(path: &Path) -> Result<M, SvmError> {
    let text = std::fs::read_to_string(path).map_err(|e| SvmError::Archive(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SvmError::Archive(format!("{}: {e}", path.display())))
}
