use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{random_lr_attack_within, AttackError, AttackScenario};
use crate::rng::{domain, stream};

use super::detector::{bucket_tau, TAU_BUCKETS};

/// Random attacks graded by realized shift, for detection curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub per_bucket: usize,
    pub k_min: usize,
    pub k_max: Option<usize>,
    pub max_redraws: usize,
    pub max_spec_retries: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { per_bucket: 500, k_min: 2, k_max: None, max_redraws: 100, max_spec_retries: 50 }
    }
}

/// `per_bucket` attacks with τ_r in ((k−1)%, k%] for every bucket k, each at a random row
/// of `loads`. Scenario hours are taken from `rows`. Attacks that cannot be drawn are
/// skipped and counted.
pub fn eval_suite(loads: &[Vec<f64>], rows: &[usize], cfg: &SuiteConfig, seed: u64) -> (Vec<AttackScenario>, usize) {
    if loads.is_empty() || cfg.per_bucket == 0 {
        return (Vec::new(), 0);
    }
    let n_l = loads[0].len();
    let k_max = cfg.k_max.unwrap_or(n_l).min(n_l);
    let tasks: Vec<(usize, usize)> =
        (1..=TAU_BUCKETS).flat_map(|b| (0..cfg.per_bucket).map(move |i| (b, i))).collect();
    let drawn: Vec<Option<AttackScenario>> = tasks
        .par_iter()
        .map(|&(b, i)| {
            let mut rng = stream(seed, domain::EVAL_SUITE, (b * 1_000_000 + i) as u64);
            let tau = bucket_tau(b);
            let floor = bucket_tau(b - 1);
            for _ in 0..=cfg.max_spec_retries {
                let h = rng.random_range(0..loads.len());
                let k = rng.random_range(cfg.k_min..=k_max);
                match random_lr_attack_within(&loads[h], k, floor, tau, &mut rng, cfg.max_redraws) {
                    Ok((mut s, _)) => {
                        s.hour = rows[h];
                        s.seed = Some(seed);
                        return Some(s);
                    }
                    Err(AttackError::InfeasibleSpec(_) | AttackError::RedrawsExceeded { .. }) => {}
                    Err(e) => {
                        log::warn!("evaluation attack at row {}: {e}", rows[h]);
                        return None;
                    }
                }
            }
            None
        })
        .collect();
    let failed = drawn.iter().filter(|d| d.is_none()).count();
    (drawn.into_iter().flatten().collect(), failed)
}
