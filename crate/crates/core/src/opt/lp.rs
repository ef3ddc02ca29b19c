//! Dense bounded-variable revised simplex.
//!
//! Problems are stated as
//!
//! ```text
//! min/max  cᵀx
//! s.t.     A_eq x  = b_eq
//!          A_ub x <= b_ub
//!          l <= x <= u        (bounds may be infinite)
//! ```
//!
//! Internally every inequality row receives a slack in `[0, ∞)`, rows that are not
//! satisfied by the initial nonbasic point receive an artificial column, and a
//! two-phase method is run with an explicit basis inverse that is refactorized
//! periodically. Pricing is Dantzig's rule with a Harris ratio test; after a run of
//! degenerate pivots the solver falls back to Bland's rule until progress resumes.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Lu, Matrix};
use crate::opt::{OptError, Sense, Status};
use crate::scalar::Real;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LpProblem<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub a_eq: Matrix<T>,
    pub b_eq: Vec<T>,
    pub a_ub: Matrix<T>,
    pub b_ub: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> LpProblem<T> {
    /// `n` variables, zero objective, bounds `[0, ∞)`.
    pub fn new(n: usize) -> Self {
        Self {
            sense: Sense::Minimize,
            objective: vec![T::zero(); n],
            a_eq: Matrix::zeros(0, n),
            b_eq: Vec::new(),
            a_ub: Matrix::zeros(0, n),
            b_ub: Vec::new(),
            lower: vec![T::zero(); n],
            upper: vec![T::infinity(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn minimize(mut self, c: Vec<T>) -> Self {
        assert_eq!(c.len(), self.num_vars(), "objective length");
        self.sense = Sense::Minimize;
        self.objective = c;
        self
    }

    pub fn maximize(mut self, c: Vec<T>) -> Self {
        assert_eq!(c.len(), self.num_vars(), "objective length");
        self.sense = Sense::Maximize;
        self.objective = c;
        self
    }

    pub fn add_eq(&mut self, row: &[T], rhs: T) {
        self.a_eq.push_row(row);
        self.b_eq.push(rhs);
    }

    pub fn add_le(&mut self, row: &[T], rhs: T) {
        self.a_ub.push_row(row);
        self.b_ub.push(rhs);
    }

    pub fn add_ge(&mut self, row: &[T], rhs: T) {
        let neg: Vec<T> = row.iter().map(|&v| -v).collect();
        self.add_le(&neg, -rhs);
    }

    pub fn set_bounds(&mut self, j: usize, lower: T, upper: T) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn set_free(&mut self, j: usize) {
        self.set_bounds(j, T::neg_infinity(), T::infinity());
    }

    pub fn validate(&self) -> Result<(), OptError> {
        let n = self.num_vars();
        if self.a_eq.cols() != n || self.a_ub.cols() != n {
            return Err(OptError::Dimension(format!(
                "constraint matrices have {}/{} columns, expected {n}",
                self.a_eq.cols(),
                self.a_ub.cols()
            )));
        }
        if self.a_eq.rows() != self.b_eq.len() || self.a_ub.rows() != self.b_ub.len() {
            return Err(OptError::Dimension("right-hand side length does not match rows".into()));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(OptError::Dimension("bound vectors have wrong length".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(OptError::Bounds(j));
            }
        }
        Ok(())
    }
}

/// Lagrange multipliers in the convention `c = A_eqᵀ y_eq + A_ubᵀ y_ub + reduced`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Duals<T> {
    pub eq: Vec<T>,
    pub ub: Vec<T>,
    pub reduced: Vec<T>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Solution<T> {
    pub status: Status,
    pub x: Vec<T>,
    pub objective: T,
    pub duals: Option<Duals<T>>,
    pub iterations: usize,
}

impl<T: Real> Solution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub(crate) fn without(status: Status, n: usize) -> Self {
        Self { status, x: vec![T::zero(); n], objective: T::nan(), duals: None, iterations: 0 }
    }

    /// Dual objective `b_eqᵀy_eq + b_ubᵀy_ub + Σ reduced_j · (active bound of x_j)`.
    pub fn dual_objective(&self, p: &LpProblem<T>) -> Option<T> {
        let d = self.duals.as_ref()?;
        let mut obj = dot(&p.b_eq, &d.eq) + dot(&p.b_ub, &d.ub);
        for j in 0..p.num_vars() {
            let r = d.reduced[j];
            if r == T::zero() {
                continue;
            }
            // the bound a nonzero reduced cost refers to is the one x_j sits on
            let lo_gap = (self.x[j] - p.lower[j]).abs();
            let hi_gap = (p.upper[j] - self.x[j]).abs();
            let bound = if lo_gap <= hi_gap { p.lower[j] } else { p.upper[j] };
            if bound.is_finite() {
                obj += r * bound;
            } else {
                obj += r * self.x[j];
            }
        }
        Some(obj)
    }

    /// Largest violation of constraints and bounds at `x`.
    pub fn primal_residual(&self, p: &LpProblem<T>) -> T {
        primal_residual(p, &self.x)
    }
}

pub fn primal_residual<T: Real>(p: &LpProblem<T>, x: &[T]) -> T {
    let mut worst = T::zero();
    for (i, &b) in p.b_eq.iter().enumerate() {
        worst = worst.max((dot(p.a_eq.row(i), x) - b).abs());
    }
    for (i, &b) in p.b_ub.iter().enumerate() {
        worst = worst.max(dot(p.a_ub.row(i), x) - b);
    }
    for (j, &v) in x.iter().enumerate() {
        worst = worst.max(p.lower[j] - v).max(v - p.upper[j]);
    }
    worst
}

#[derive(Clone, Debug)]
pub struct LpOptions<T> {
    pub pivot_tol: T,
    pub feas_tol: T,
    pub opt_tol: T,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_limit: usize,
    pub refactor_every: usize,
    pub max_iter: Option<usize>,
}

impl<T: Real> Default for LpOptions<T> {
    fn default() -> Self {
        Self {
            pivot_tol: T::tol(1e-9),
            feas_tol: T::tol(1e-9),
            opt_tol: T::tol(1e-9),
            degenerate_limit: 40,
            refactor_every: 64,
            max_iter: None,
        }
    }
}

pub fn solve_lp<T: Real>(p: &LpProblem<T>) -> Result<Solution<T>, OptError> {
    solve_lp_with(p, &LpOptions::default())
}

pub fn solve_lp_with<T: Real>(p: &LpProblem<T>, opts: &LpOptions<T>) -> Result<Solution<T>, OptError> {
    p.validate()?;
    let mut s = Simplex::build(p, opts);
    let n = p.num_vars();

    let phase1 = s.run(opts)?;
    debug_assert!(phase1 != Outcome::Unbounded, "phase one is bounded below by zero");
    let infeas: T = s.artificials.iter().map(|&j| s.x[j]).sum();
    let b_scale = p.b_eq.iter().chain(&p.b_ub).fold(T::one(), |m, &v| m.max(v.abs()));
    if infeas > opts.feas_tol * b_scale * T::of(10.0) {
        let mut sol = Solution::without(Status::Infeasible, n);
        sol.iterations = s.iterations;
        return Ok(sol);
    }
    for &j in &s.artificials {
        s.lo[j] = T::zero();
        s.hi[j] = T::zero();
        if s.pos[j].is_none() {
            s.x[j] = T::zero();
        }
    }
    s.cost = s.phase2_cost.clone();
    if s.run(opts)? == Outcome::Unbounded {
        let mut sol = Solution::without(Status::Unbounded, n);
        sol.iterations = s.iterations;
        return Ok(sol);
    }
    s.refactor()?;

    let sign = match p.sense {
        Sense::Minimize => T::one(),
        Sense::Maximize => -T::one(),
    };
    let y = s.row_duals();
    let mut reduced = Vec::with_capacity(n);
    for j in 0..n {
        let d = if s.pos[j].is_some() { T::zero() } else { s.cost[j] - s.col_dot(j, &y) };
        reduced.push(sign * d);
    }
    let m_eq = p.b_eq.len();
    let duals = Duals {
        eq: y[..m_eq].iter().map(|&v| sign * v).collect(),
        ub: y[m_eq..].iter().map(|&v| sign * v).collect(),
        reduced,
    };
    let x: Vec<T> = s.x[..n].to_vec();
    let objective = dot(&p.objective, &x);
    Ok(Solution { status: Status::Optimal, x, objective, duals: Some(duals), iterations: s.iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

struct Simplex<T> {
    m: usize,
    ncols: usize,
    /// column-major, stride `m`
    a: Vec<T>,
    b: Vec<T>,
    cost: Vec<T>,
    phase2_cost: Vec<T>,
    lo: Vec<T>,
    hi: Vec<T>,
    x: Vec<T>,
    basis: Vec<usize>,
    pos: Vec<Option<usize>>,
    binv: Matrix<T>,
    artificials: Vec<usize>,
    iterations: usize,
    since_refactor: usize,
}

impl<T: Real> Simplex<T> {
    fn build(p: &LpProblem<T>, opts: &LpOptions<T>) -> Self {
        let n = p.num_vars();
        let m_eq = p.b_eq.len();
        let m_ub = p.b_ub.len();
        let m = m_eq + m_ub;
        let sign = match p.sense {
            Sense::Minimize => T::one(),
            Sense::Maximize => -T::one(),
        };

        let mut lo = p.lower.clone();
        let mut hi = p.upper.clone();
        let mut x: Vec<T> = (0..n)
            .map(|j| {
                if lo[j].is_finite() {
                    lo[j]
                } else if hi[j].is_finite() {
                    hi[j]
                } else {
                    T::zero()
                }
            })
            .collect();

        let mut a = Vec::with_capacity((n + m_ub + m) * m);
        for j in 0..n {
            for i in 0..m_eq {
                a.push(p.a_eq[(i, j)]);
            }
            for i in 0..m_ub {
                a.push(p.a_ub[(i, j)]);
            }
        }
        for k in 0..m_ub {
            for i in 0..m {
                a.push(if i == m_eq + k { T::one() } else { T::zero() });
            }
            lo.push(T::zero());
            hi.push(T::infinity());
            x.push(T::zero());
        }

        let b: Vec<T> = p.b_eq.iter().chain(&p.b_ub).copied().collect();
        let mut resid = b.clone();
        for j in 0..n {
            if x[j] != T::zero() {
                for i in 0..m {
                    resid[i] -= a[j * m + i] * x[j];
                }
            }
        }

        let mut basis = vec![0; m];
        let mut binv = Matrix::zeros(m, m);
        let mut artificials = Vec::new();
        let mut ncols = n + m_ub;
        for i in 0..m {
            if i >= m_eq && resid[i] >= -opts.feas_tol {
                let s = n + (i - m_eq);
                basis[i] = s;
                x[s] = resid[i].max(T::zero());
                binv[(i, i)] = T::one();
            } else {
                let sgn = if resid[i] < T::zero() { -T::one() } else { T::one() };
                for r in 0..m {
                    a.push(if r == i { sgn } else { T::zero() });
                }
                lo.push(T::zero());
                hi.push(T::infinity());
                x.push(resid[i].abs());
                basis[i] = ncols;
                binv[(i, i)] = sgn;
                artificials.push(ncols);
                ncols += 1;
            }
        }

        let mut pos = vec![None; ncols];
        for (i, &j) in basis.iter().enumerate() {
            pos[j] = Some(i);
        }
        let mut phase2_cost: Vec<T> = p.objective.iter().map(|&c| sign * c).collect();
        phase2_cost.resize(ncols, T::zero());
        let mut cost = vec![T::zero(); ncols];
        for &j in &artificials {
            cost[j] = T::one();
        }

        Self {
            m,
            ncols,
            a,
            b,
            cost,
            phase2_cost,
            lo,
            hi,
            x,
            basis,
            pos,
            binv,
            artificials,
            iterations: 0,
            since_refactor: 0,
        }
    }

    #[inline]
    fn col(&self, j: usize) -> &[T] {
        &self.a[j * self.m..(j + 1) * self.m]
    }

    #[inline]
    fn col_dot(&self, j: usize, y: &[T]) -> T {
        dot(self.col(j), y)
    }

    fn row_duals(&self) -> Vec<T> {
        let mut y = vec![T::zero(); self.m];
        for (k, &bj) in self.basis.iter().enumerate() {
            let c = self.cost[bj];
            if c == T::zero() {
                continue;
            }
            for (yi, &v) in y.iter_mut().zip(self.binv.row(k)) {
                *yi += c * v;
            }
        }
        y
    }

    fn refactor(&mut self) -> Result<(), OptError> {
        if self.m == 0 {
            return Ok(());
        }
        let mut bmat = Matrix::zeros(self.m, self.m);
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..self.m {
                bmat[(i, k)] = self.a[j * self.m + i];
            }
        }
        let lu = Lu::factor(&bmat).map_err(|_| OptError::Numerical("basis matrix became singular".into()))?;
        self.binv = lu.inverse();
        let mut rhs = self.b.clone();
        for j in 0..self.ncols {
            if self.pos[j].is_none() && self.x[j] != T::zero() {
                let xj = self.x[j];
                for i in 0..self.m {
                    rhs[i] -= self.a[j * self.m + i] * xj;
                }
            }
        }
        let xb = self.binv.mul_vec(&rhs);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[k];
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn run(&mut self, opts: &LpOptions<T>) -> Result<Outcome, OptError> {
        let max_iter = opts.max_iter.unwrap_or(200 * (self.m + self.ncols) + 1000);
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut alpha = vec![T::zero(); self.m];
        loop {
            if self.since_refactor >= opts.refactor_every {
                self.refactor()?;
            }
            let y = self.row_duals();

            // pricing
            let mut enter: Option<(usize, T, T)> = None; // (col, dir, |d|)
            for j in 0..self.ncols {
                if self.pos[j].is_some() || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = self.cost[j] - self.col_dot(j, &y);
                let xj = self.x[j];
                let dir = if d < -opts.opt_tol && xj < self.hi[j] {
                    T::one()
                } else if d > opts.opt_tol && xj > self.lo[j] {
                    -T::one()
                } else {
                    continue;
                };
                let score = d.abs();
                if bland {
                    enter = Some((j, dir, score));
                    break;
                }
                if enter.map_or(true, |(_, _, best)| score > best) {
                    enter = Some((j, dir, score));
                }
            }
            let Some((q, dir, _)) = enter else {
                return Ok(Outcome::Optimal);
            };

            self.iterations += 1;
            if self.iterations > max_iter {
                return Err(OptError::Numerical(format!("simplex iteration limit {max_iter} reached")));
            }

            // alpha = B⁻¹ a_q
            let colq = &self.a[q * self.m..(q + 1) * self.m];
            for (k, ak) in alpha.iter_mut().enumerate() {
                *ak = dot(self.binv.row(k), colq);
            }

            // entering variable's own range
            let t_flip = if dir > T::zero() { self.hi[q] - self.x[q] } else { self.x[q] - self.lo[q] };

            // Harris pass one: largest step keeping basics within relaxed bounds
            let mut t_relaxed = T::infinity();
            for k in 0..self.m {
                let r = -dir * alpha[k];
                if r.abs() <= opts.pivot_tol {
                    continue;
                }
                let bj = self.basis[k];
                let t = if r < T::zero() {
                    if !self.lo[bj].is_finite() {
                        continue;
                    }
                    (self.x[bj] - self.lo[bj] + opts.feas_tol) / -r
                } else {
                    if !self.hi[bj].is_finite() {
                        continue;
                    }
                    (self.hi[bj] - self.x[bj] + opts.feas_tol) / r
                };
                t_relaxed = t_relaxed.min(t);
            }

            // pass two: among rows whose exact ratio fits, pick the sturdiest pivot
            let mut leave: Option<(usize, T, T)> = None; // (row, exact t, |alpha|)
            for k in 0..self.m {
                let r = -dir * alpha[k];
                if r.abs() <= opts.pivot_tol {
                    continue;
                }
                let bj = self.basis[k];
                let t = if r < T::zero() {
                    if !self.lo[bj].is_finite() {
                        continue;
                    }
                    (self.x[bj] - self.lo[bj]) / -r
                } else {
                    if !self.hi[bj].is_finite() {
                        continue;
                    }
                    (self.hi[bj] - self.x[bj]) / r
                };
                if t > t_relaxed {
                    continue;
                }
                let t = t.max(T::zero());
                let better = match leave {
                    None => true,
                    Some((kk, _, mag)) => {
                        if bland {
                            bj < self.basis[kk]
                        } else {
                            r.abs() > mag
                        }
                    }
                };
                if better {
                    leave = Some((k, t, r.abs()));
                }
            }

            let step = match leave {
                Some((_, t, _)) => t,
                None => T::infinity(),
            };
            if !t_flip.is_finite() && !step.is_finite() {
                return Ok(Outcome::Unbounded);
            }

            let bound_flip = t_flip <= step;
            let t = if bound_flip { t_flip } else { step };

            if t <= opts.feas_tol {
                degenerate_run += 1;
                if degenerate_run > opts.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            // move
            self.x[q] += dir * t;
            for k in 0..self.m {
                let bj = self.basis[k];
                self.x[bj] -= dir * alpha[k] * t;
            }

            if bound_flip {
                self.x[q] = if dir > T::zero() { self.hi[q] } else { self.lo[q] };
                continue;
            }

            let (r, _, _) = leave.expect("finite step has a leaving row");
            let leaving = self.basis[r];
            let rr = -dir * alpha[r];
            self.x[leaving] = if rr < T::zero() { self.lo[leaving] } else { self.hi[leaving] };
            self.pos[leaving] = None;
            self.basis[r] = q;
            self.pos[q] = Some(r);

            let piv = alpha[r];
            {
                let row_r: Vec<T> = self.binv.row(r).iter().map(|&v| v / piv).collect();
                self.binv.row_mut(r).copy_from_slice(&row_r);
                for k in 0..self.m {
                    if k == r || alpha[k] == T::zero() {
                        continue;
                    }
                    let f = alpha[k];
                    for (dst, &src) in self.binv.row_mut(k).iter_mut().zip(&row_r) {
                        *dst -= f * src;
                    }
                }
            }
            self.since_refactor += 1;
        }
    }
}
