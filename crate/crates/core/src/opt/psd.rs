//! Positive semidefinite projections.
//!
//! [`constrained_psd`] looks for a covariance matrix with a prescribed diagonal whose
//! quadratic form vanishes on the all-ones vector, i.e. a PSD `Γ` with
//! `Γ_kk = t_k` and `1ᵀΓ1 = 0`. It runs Dykstra's alternating projections between
//! the PSD cone and that affine set.

use crate::linalg::{dot, Lu, Matrix, SymEigen};
use crate::opt::OptError;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct PsdOptions<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for PsdOptions<T> {
    fn default() -> Self {
        Self { tol: T::tol(1e-8), max_iter: 10_000 }
    }
}

fn check_symmetric<T: Real>(m: &Matrix<T>) -> Result<(), OptError> {
    if !m.is_square() {
        return Err(OptError::Dimension(format!("{}x{} matrix is not square", m.rows(), m.cols())));
    }
    let asym = m.asymmetry();
    if asym > T::tol(1e-12) * m.max_abs().max(T::one()) {
        return Err(OptError::NotSymmetric(asym.as_f64()));
    }
    Ok(())
}

/// Frobenius-nearest PSD matrix: clip negative eigenvalues to zero.
pub fn project_psd<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>, OptError> {
    check_symmetric(m)?;
    Ok(clip(m))
}

fn clip<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    clip_at(m, T::zero())
}

/// Projection onto `{S : S ⪰ floor·I}`.
fn clip_at<T: Real>(m: &Matrix<T>, floor: T) -> Matrix<T> {
    let eig = SymEigen::new(m);
    if eig.min_value() >= floor {
        return m.clone();
    }
    eig.reconstruct_with(|l| l.max(floor))
}

/// Dykstra between `{S ⪰ shift·I}` and the diagonal constraint. Returns the last cone
/// iterate, the final gap between the two iterates and the iteration count.
fn dykstra<T: Real>(
    constraint: &DiagonalConstraint<T>,
    start: &Matrix<T>,
    shift: T,
    stop: T,
    tol: T,
    max_iter: usize,
) -> (Matrix<T>, T, usize) {
    let n = start.rows();
    let mut x = start.clone();
    let mut p = Matrix::zeros(n, n);
    let mut q = Matrix::zeros(n, n);
    let mut last_gap = T::infinity();
    let mut gap = T::infinity();
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let xp = x.add(&p);
        let y = constraint.project(&xp);
        p = xp.sub(&y);
        let z = y.add(&q);
        let x_next = clip_at(&z, shift);
        q = z.sub(&x_next);
        gap = x_next.sub(&y).frobenius_norm();
        x = x_next;
        if gap <= stop {
            break;
        }
        // iterates of disjoint sets settle at a fixed positive distance
        if it % 100 == 0 {
            if gap > tol && (last_gap - gap).abs() <= T::tol(1e-6) * gap {
                break;
            }
            last_gap = gap;
        }
    }
    (x, gap, iterations)
}

/// Orthonormal basis of the complement of `v`, `k × (k-1)`: the trailing columns of the
/// Householder reflection taking `e_1` to `v/‖v‖`.
fn complement_basis<T: Real>(v: &[T]) -> Matrix<T> {
    let k = v.len();
    let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    let mut h: Vec<T> = v.iter().map(|&x| x / norm).collect();
    // reflect away from e_1 on the side that avoids cancellation
    let sign = if h[0] >= T::zero() { T::one() } else { -T::one() };
    h[0] = h[0] + sign;
    let hh = h.iter().map(|&x| x * x).sum::<T>();
    let mut u = Matrix::zeros(k, k - 1);
    for i in 0..k {
        for j in 1..k {
            let id = if i == j { T::one() } else { T::zero() };
            u[(i, j - 1)] = id - T::of(2.0) * h[i] * h[j] / hh;
        }
    }
    u
}

/// Projection in the reduced space onto `{S : diag(U S Uᵀ) = t}`.
struct DiagonalConstraint<T> {
    basis: Matrix<T>,
    gram: Lu<T>,
    target: Vec<T>,
}

impl<T: Real> DiagonalConstraint<T> {
    fn new(basis: Matrix<T>, target: Vec<T>) -> Option<Self> {
        let k = target.len();
        let mut gram = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let ip = dot(basis.row(a), basis.row(b));
                gram[(a, b)] = ip * ip;
            }
        }
        let gram = Lu::factor(&gram).ok()?;
        Some(Self { basis, gram, target })
    }

    fn diag_of(&self, s: &Matrix<T>) -> Vec<T> {
        let k = self.target.len();
        (0..k)
            .map(|a| {
                let u = self.basis.row(a);
                let su = s.mul_vec(u);
                dot(u, &su)
            })
            .collect()
    }

    fn project(&self, s: &Matrix<T>) -> Matrix<T> {
        let resid: Vec<T> = self.diag_of(s).iter().zip(&self.target).map(|(&d, &t)| d - t).collect();
        let mu = self.gram.solve(&resid);
        let n = s.rows();
        let mut out = s.clone();
        for (a, &m) in mu.iter().enumerate() {
            let u = self.basis.row(a);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] -= m * u[i] * u[j];
                }
            }
        }
        out
    }

    fn lift(&self, s: &Matrix<T>) -> Matrix<T> {
        self.basis.matmul(s).matmul(&self.basis.transpose())
    }
}

/// PSD matrix with diagonal `diag` and `1ᵀΓ1 = 0`, or [`OptError::PsdInfeasible`].
///
/// Every such `Γ` has the all-ones vector in its null space. Writing `Γ = D C D` with
/// `D = diag(√diag)` moves that to `Cσ = 0` with `diag C = 1`, and the search runs over
/// `C = U S Uᵀ` with `U` an orthonormal basis of `σ⊥`: the zero-sum condition then holds
/// by construction and Dykstra alternates between `S ⪰ 0` and the unit diagonal. On
/// success `Γ_kk` matches `diag` within `tol · mean(diag)` and the
/// smallest eigenvalue is at least `-tol · mean(diag)`.
pub fn constrained_psd<T: Real>(diag: &[T], opts: &PsdOptions<T>) -> Result<Matrix<T>, OptError> {
    let k = diag.len();
    if k == 0 {
        return Err(OptError::Invalid("empty diagonal".into()));
    }
    if let Some(i) = diag.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
        return Err(OptError::Invalid(format!("diagonal entry {i} must be strictly positive")));
    }
    if k == 1 {
        // 1ᵀΓ1 = Γ_11 > 0
        return Err(OptError::PsdInfeasible { residual: diag[0].as_f64(), iterations: 0 });
    }

    // Γ = D C D with D = diag(σ): C has a unit diagonal and σ in its null space, which
    // keeps the iteration well conditioned however uneven the σ are
    let sd: Vec<T> = diag.iter().map(|&v| v.sqrt()).collect();
    let tol = opts.tol;

    if k == 2 {
        // the complement of 1 is one-dimensional: Γ = s·[[1,-1],[-1,1]]
        let scale = (diag[0] + diag[1]) * T::of(0.5);
        let spread = (diag[0] - diag[1]).abs() / scale;
        if spread > tol {
            return Err(OptError::PsdInfeasible { residual: spread.as_f64(), iterations: 0 });
        }
        return Ok(Matrix::from_rows(&[vec![scale, -scale], vec![-scale, scale]]));
    }

    let Some(constraint) = DiagonalConstraint::new(complement_basis(&sd), vec![T::one(); k]) else {
        return Err(OptError::PsdInfeasible { residual: f64::INFINITY, iterations: 0 });
    };
    // errors in C grow by at most max(diag)/mean(diag) in Γ
    let mean = diag.iter().copied().sum::<T>() / T::of(k as f64);
    let max = diag.iter().copied().fold(T::zero(), T::max);
    let tol_c = tol * mean / max;
    let start = constraint.basis.transpose().matmul(&constraint.basis);

    let mut outcome = None;
    let mut total_iter = 0;
    // a shifted cone S ⪰ δI leaves room around strictly feasible points, where the
    // iteration converges fast; the unshifted cone covers instances without that room
    for shift in [T::of(0.5), T::of(0.05), T::zero()] {
        let stop = if shift > T::zero() { shift * T::of(0.5) } else { tol_c * T::of(1e-2) };
        let (x, gap, iterations) = dykstra(&constraint, &start, shift, stop, tol_c, opts.max_iter);
        total_iter += iterations;
        let reduced = constraint.project(&x);
        let min_eig = SymEigen::new(&reduced).min_value();
        if gap <= tol_c.max(stop) && min_eig >= -tol_c {
            outcome = Some(reduced);
            break;
        }
        if shift == T::zero() {
            return Err(OptError::PsdInfeasible { residual: gap.max(-min_eig).as_f64(), iterations: total_iter });
        }
    }
    let reduced = outcome.expect("loop returns on failure");
    let c = constraint.lift(&reduced);
    let mut gamma = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            gamma[(i, j)] = sd[i] * c[(i, j)] * sd[j];
        }
    }
    // symmetrize rounding
    for i in 0..k {
        for j in (i + 1)..k {
            let v = (gamma[(i, j)] + gamma[(j, i)]) * T::of(0.5);
            gamma[(i, j)] = v;
            gamma[(j, i)] = v;
        }
    }
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_input_is_unchanged() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!(project_psd(&m).unwrap().sub(&m).max_abs() < 1e-10);
    }

    #[test]
    fn negative_eigenvalue_is_clipped() {
        let m = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]);
        let p = project_psd(&m).unwrap();
        assert!(p.sub(&Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]])).max_abs() < 1e-12);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(project_psd(&m), Err(OptError::NotSymmetric(_))));
    }

    #[test]
    fn two_equal_variances_force_perfect_anticorrelation() {
        let s2 = 2.25;
        let g = constrained_psd(&[s2, s2], &PsdOptions::default()).unwrap();
        let expect = Matrix::from_rows(&[vec![s2, -s2], vec![-s2, s2]]);
        assert!(g.sub(&expect).max_abs() < 1e-7, "{g:?}");
    }

    #[test]
    fn two_unequal_variances_are_infeasible() {
        let r = constrained_psd(&[1.0, 4.0], &PsdOptions::default());
        assert!(matches!(r, Err(OptError::PsdInfeasible { .. })), "{r:?}");
    }

    #[test]
    fn three_comparable_variances_are_feasible() {
        let d = [1.0f64, 1.2, 0.8];
        let g = constrained_psd(&d, &PsdOptions::default()).unwrap();
        for (i, &v) in d.iter().enumerate() {
            assert!((g[(i, i)] - v).abs() < 1e-12);
        }
        assert!(g.total_sum().abs() <= 1e-8 * 3.0);
        assert!(SymEigen::new(&g).min_value() >= -1e-8);
    }

    #[test]
    fn rejects_nonpositive_diagonal() {
        assert!(matches!(constrained_psd(&[1.0, 0.0], &PsdOptions::default()), Err(OptError::Invalid(_))));
    }
}
