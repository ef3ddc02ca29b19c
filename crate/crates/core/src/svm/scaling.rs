use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Real;

/// Per-column affine scaling to zero mean and unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    /// Population standard deviation; constant columns get 1.
    pub scale: Vec<T>,
    /// Columns whose training values were constant.
    #[serde(default)]
    pub constant: Vec<usize>,
}

impl<T: Real> Standardizer<T> {
    /// Statistics over the given rows of `x` (all rows when `rows` is `None`).
    pub fn fit(x: &Matrix<T>, rows: Option<&[usize]>) -> Option<Self> {
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..x.rows()).collect();
                &all
            }
        };
        if rows.is_empty() {
            return None;
        }
        let p = x.cols();
        let n = T::of(rows.len() as f64);
        let mut mean = vec![T::zero(); p];
        for &r in rows {
            for (m, &v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![T::zero(); p];
        for &r in rows {
            for ((s, &v), &m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut constant = Vec::new();
        let scale = var
            .into_iter()
            .enumerate()
            .map(|(j, s)| {
                let sd = (s / n).sqrt();
                if sd > T::epsilon() * mean[j].abs().max(T::one()) {
                    sd
                } else {
                    constant.push(j);
                    T::one()
                }
            })
            .collect();
        Some(Self { mean, scale, constant })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[T]) -> Vec<T> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| (v - m) / s).collect()
    }

    pub fn invert_row(&self, row: &[T]) -> Vec<T> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| v * s + m).collect()
    }

    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(0, x.cols());
        for i in 0..x.rows() {
            out.push_row(&self.apply_row(x.row(i)));
        }
        out
    }

    pub fn invert(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(0, x.cols());
        for i in 0..x.rows() {
            out.push_row(&self.invert_row(x.row(i)));
        }
        out
    }

    /// Maps a single scaled value of column `j` back.
    pub fn invert_value(&self, j: usize, v: T) -> T {
        v * self.scale[j] + self.mean[j]
    }
}
