use std::sync::Arc;

use crate::linalg::Matrix;
use crate::scalar::Real;

use super::KernelSpec;

/// Kernel rows over a fixed training set, computed on demand and kept up to a row budget
/// (least recently used rows are dropped first). A cache that holds every row can be
/// cloned cheaply and shared between trainings on the same data.
#[derive(Clone)]
pub struct KernelCache<T> {
    x: Arc<Matrix<T>>,
    spec: KernelSpec<T>,
    rows: Vec<Option<Arc<[T]>>>,
    last_used: Vec<u64>,
    clock: u64,
    held: usize,
    capacity: usize,
    diag: Vec<T>,
}

impl<T: Real> KernelCache<T> {
    /// `budget_mb` bounds the memory held by cached rows; at least two rows are kept.
    pub fn new(x: Arc<Matrix<T>>, spec: KernelSpec<T>, budget_mb: usize) -> Self {
        let m = x.rows();
        let row_bytes = (m * std::mem::size_of::<T>()).max(1);
        let capacity = ((budget_mb << 20) / row_bytes).clamp(2, m.max(2));
        let diag = (0..m).map(|i| spec.eval_unchecked(x.row(i), x.row(i))).collect();
        Self { x, spec, rows: vec![None; m], last_used: vec![0; m], clock: 0, held: 0, capacity, diag }
    }

    /// Fills every row up front (rows are built in parallel).
    pub fn precomputed(x: Arc<Matrix<T>>, spec: KernelSpec<T>) -> Self {
        use rayon::prelude::*;
        let m = x.rows();
        let mut cache = Self::new(x, spec, 0);
        cache.capacity = m.max(2);
        let rows: Vec<Arc<[T]>> = (0..m).into_par_iter().map(|i| cache.compute(i)).collect();
        cache.rows = rows.into_iter().map(Some).collect();
        cache.held = m;
        cache
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    pub fn data(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn diag(&self, i: usize) -> T {
        self.diag[i]
    }

    fn compute(&self, i: usize) -> Arc<[T]> {
        let xi = self.x.row(i);
        (0..self.x.rows()).map(|j| self.spec.eval_unchecked(xi, self.x.row(j))).collect()
    }

    pub fn row(&mut self, i: usize) -> Arc<[T]> {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if let Some(r) = &self.rows[i] {
            return r.clone();
        }
        if self.held >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&j| j != i && self.rows[j].is_some())
                .min_by_key(|&j| self.last_used[j])
                .expect("cache holds rows");
            self.rows[victim] = None;
            self.held -= 1;
        }
        let r = self.compute(i);
        self.rows[i] = Some(r.clone());
        self.held += 1;
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::kernel_matrix;

    #[test]
    fn small_budget_still_returns_exact_rows() {
        let x = Matrix::from_rows(&(0..7).map(|i| vec![i as f64 * 0.3, (i * i) as f64 * 0.1]).collect::<Vec<_>>());
        let spec = KernelSpec::rbf(0.7);
        let full = kernel_matrix(&spec, &x);
        let mut cache = KernelCache::new(Arc::new(x), spec, 0);
        for round in 0..3 {
            for i in (0..7).rev().chain(0..7) {
                let r = cache.row((i + round) % 7);
                assert_eq!(&r[..], full.row((i + round) % 7));
            }
        }
        assert!(cache.held <= 2);
    }
}
