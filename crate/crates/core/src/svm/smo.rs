//! Pairwise coordinate descent for `min ½αᵀQα + pᵀα  s.t. yᵀα = const, 0 ≤ α ≤ C`
//! with `Q_ts = y_t y_s K(x_t, x_s)` and `y ∈ {±1}`. The working pair is the maximal
//! violator `i` plus the partner `j` with the largest second-order decrease.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::{KernelCache, SvmError};

#[derive(Clone, Debug)]
pub struct SmoOptions<T> {
    /// Stop once the maximal KKT violation `m(α) - M(α)` falls below this.
    pub tol: T,
    /// Cap on pair updates.
    pub max_iter: u64,
    /// Row cache budget when a training run builds its own kernel cache.
    pub cache_mb: usize,
}

impl<T: Real> Default for SmoOptions<T> {
    fn default() -> Self {
        Self { tol: T::of(1e-3), max_iter: 10_000_000, cache_mb: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoStats {
    pub iterations: u64,
    pub violation: f64,
    /// Dual objective in maximization form (the negated minimum above).
    pub dual_objective: f64,
}

pub(crate) struct Problem<T> {
    /// Kernel row backing each variable.
    pub sample: Vec<usize>,
    pub y: Vec<T>,
    pub p: Vec<T>,
    pub upper: Vec<T>,
}

pub(crate) struct Solution<T> {
    pub alpha: Vec<T>,
    /// Decision function is `Σ y_t α_t K(x_t, x) - rho`.
    pub rho: T,
    pub stats: SmoStats,
}

const TAU: f64 = 1e-12;

pub(crate) fn solve<T: Real>(
    cache: &mut KernelCache<T>,
    prob: &Problem<T>,
    opts: &SmoOptions<T>,
) -> Result<Solution<T>, SvmError> {
    let l = prob.y.len();
    let y = &prob.y;
    let upper = &prob.upper;
    let tau = T::of(TAU);
    let mut alpha = vec![T::zero(); l];
    let mut grad = prob.p.clone();
    let qd: Vec<T> = prob.sample.iter().map(|&s| cache.diag(s)).collect();
    let pos = |t: usize| y[t] > T::zero();

    let mut iterations = 0u64;
    let violation = loop {
        // maximal violator over I_up
        let mut gmax = T::neg_infinity();
        let mut i = usize::MAX;
        for t in 0..l {
            let v = -y[t] * grad[t];
            let up = if pos(t) { alpha[t] < upper[t] } else { alpha[t] > T::zero() };
            if up && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        if i == usize::MAX {
            break T::zero();
        }
        let ki = cache.row(prob.sample[i]);

        let mut gmax2 = T::neg_infinity();
        let mut best = T::infinity();
        let mut j = usize::MAX;
        for t in 0..l {
            let low = if pos(t) { alpha[t] > T::zero() } else { alpha[t] < upper[t] };
            if !low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let diff = gmax + v;
            if diff > T::zero() {
                let quad = qd[i] + qd[t] - T::of(2.0) * ki[prob.sample[t]];
                let obj = -(diff * diff) / if quad > T::zero() { quad } else { tau };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        let gap = gmax + gmax2;
        if gap < opts.tol || j == usize::MAX {
            break gap.max(T::zero());
        }
        if iterations >= opts.max_iter {
            return Err(SvmError::NotConverged { iterations, violation: gap.as_f64() });
        }
        iterations += 1;

        let kj = cache.row(prob.sample[j]);
        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = qd[i] + qd[j] - T::of(2.0) * ki[prob.sample[j]];
        if quad <= T::zero() {
            quad = tau;
        }
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > T::zero() {
                if aj < T::zero() {
                    aj = T::zero();
                    ai = diff;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < T::zero() {
                aj = T::zero();
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < T::zero() {
                ai = T::zero();
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;

        let di = (ai - old_i) * y[i];
        let dj = (aj - old_j) * y[j];
        for t in 0..l {
            let s = prob.sample[t];
            grad[t] += y[t] * (ki[s] * di + kj[s] * dj);
        }
    };

    let rho = bias(&alpha, &grad, y, upper);
    let objective: T = alpha.iter().zip(&grad).zip(&prob.p).map(|((&a, &g), &p)| a * (g + p)).sum::<T>() * T::of(0.5);
    Ok(Solution {
        alpha,
        rho,
        stats: SmoStats { iterations, violation: violation.as_f64(), dual_objective: -objective.as_f64() },
    })
}

/// Average of `y_t ∇_t` over free variables, else the midpoint of the feasible interval.
fn bias<T: Real>(alpha: &[T], grad: &[T], y: &[T], upper: &[T]) -> T {
    let mut ub = T::infinity();
    let mut lb = T::neg_infinity();
    let mut sum = T::zero();
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= upper[t];
        let at_lower = alpha[t] <= T::zero();
        let pos = y[t] > T::zero();
        if at_upper {
            if pos {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if at_lower {
            if pos {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / T::of(free as f64)
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) * T::of(0.5)
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        T::zero()
    }
}
