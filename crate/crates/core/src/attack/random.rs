use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{load_shift, AttackError, AttackKind, AttackScenario};
use crate::linalg::{Matrix, SymEigen};
use crate::opt::{constrained_psd, OptError, PsdOptions};

/// Draw details of one random attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomAttackSpec {
    /// Attacked load indices, ascending.
    pub attacked: Vec<usize>,
    /// `σ_k = ½ τ P_k`.
    pub sigma: Vec<f64>,
    pub covariance: Matrix<f64>,
    /// Accepted load changes on the attacked loads.
    pub gamma: Vec<f64>,
    /// Draws used, including the accepted one.
    pub draws: usize,
}

/// `L` with `Γ = L Lᵀ`, from the clipped eigendecomposition.
pub fn covariance_factor(gamma: &Matrix<f64>) -> Matrix<f64> {
    let eig = SymEigen::new(gamma);
    let n = gamma.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let s = eig.values[j].max(0.0).sqrt();
        for i in 0..n {
            l[(i, j)] = eig.vectors[(i, j)] * s;
        }
    }
    l
}

/// One draw of `γ ~ N(0, Γ)` given a factor of `Γ`, re-centred so the entries sum to zero.
///
/// `Γ1 = 0` already forces a zero sum; the re-centring only removes rounding.
pub fn sample_gamma<R: Rng + ?Sized>(factor: &Matrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = factor.rows();
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut g = factor.mul_vec(&z);
    let mean = g.iter().sum::<f64>() / n as f64;
    for v in &mut g {
        *v -= mean;
    }
    g
}

/// Random LR attack on `k` loads with load shift at most `tau`.
///
/// Picks the attacked set uniformly, builds a zero-sum covariance with standard deviations
/// `½ τ P_k`, and redraws until the realized shift is within `tau` (at most `1 + max_redraws`
/// draws). The returned scenario has hour 0; callers set it.
pub fn random_lr_attack<R: Rng + ?Sized>(
    p: &[f64],
    k: usize,
    tau: f64,
    rng: &mut R,
    max_redraws: usize,
) -> Result<(AttackScenario, RandomAttackSpec), AttackError> {
    random_lr_attack_within(p, k, 0.0, tau, rng, max_redraws)
}

/// As [`random_lr_attack`], but draws are also rejected unless the realized shift exceeds
/// `tau_floor`.
pub fn random_lr_attack_within<R: Rng + ?Sized>(
    p: &[f64],
    k: usize,
    tau_floor: f64,
    tau: f64,
    rng: &mut R,
    max_redraws: usize,
) -> Result<(AttackScenario, RandomAttackSpec), AttackError> {
    let n = p.len();
    if !(tau_floor >= 0.0 && tau_floor < tau) && tau > 0.0 {
        return Err(AttackError::Invalid(format!("shift floor {tau_floor} must lie in [0, {tau})")));
    }
    if k < 2 || k > n {
        return Err(AttackError::Invalid(format!("K = {k} must lie in [2, {n}]")));
    }
    if !(tau > 0.0) {
        return Err(AttackError::Invalid(format!("load shift must be positive, got {tau}")));
    }
    let mut attacked = sample(rng, n, k).into_vec();
    attacked.sort_unstable();
    if let Some(&i) = attacked.iter().find(|&&i| !(p[i] > 0.0)) {
        return Err(AttackError::Invalid(format!("attacked load {i} is not positive ({})", p[i])));
    }

    let sigma: Vec<f64> = attacked.iter().map(|&i| 0.5 * tau * p[i]).collect();
    // zero-sum vectors of lengths σ exist only if the longest is at most the rest combined
    let total: f64 = sigma.iter().sum();
    let longest = sigma.iter().copied().fold(0.0, f64::max);
    if 2.0 * longest > total * (1.0 + 1e-6) {
        return Err(AttackError::InfeasibleSpec(OptError::PsdInfeasible { residual: (2.0 * longest - total) / total, iterations: 0 }));
    }
    let diag: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let covariance = constrained_psd(&diag, &PsdOptions::default()).map_err(AttackError::InfeasibleSpec)?;
    let factor = covariance_factor(&covariance);

    let p_sub: Vec<f64> = attacked.iter().map(|&i| p[i]).collect();
    let mut last_tau = f64::INFINITY;
    for draw in 1..=max_redraws + 1 {
        let gamma = sample_gamma(&factor, rng);
        let tau_r = load_shift(&p_sub, &gamma)?;
        last_tau = tau_r;
        if tau_r > tau || (tau_floor > 0.0 && tau_r <= tau_floor) {
            continue;
        }
        let mut delta_p = vec![0.0; n];
        for (&i, &g) in attacked.iter().zip(&gamma) {
            delta_p[i] = g;
        }
        let mut scenario = AttackScenario::new(0, AttackKind::Random, p, delta_p, tau)?;
        scenario.k = Some(k);
        scenario.attacked = Some(attacked.clone());
        let spec = RandomAttackSpec { attacked, sigma, covariance, gamma, draws: draw };
        return Ok((scenario, spec));
    }
    Err(AttackError::RedrawsExceeded { tries: max_redraws + 1, last_tau })
}
