use log::{info, warn};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cm_attack, lo_attack, random_lr_attack, AttackError, AttackKind, AttackScenario, BilevelOptions};
use crate::dcopf::{critical_hours, CriticalHour};
use crate::grid::NetworkModel;
use crate::rng::{domain, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Random attacks to generate.
    pub random_count: usize,
    /// Load shifts drawn uniformly for random attacks.
    pub random_tau_grid: Vec<f64>,
    pub k_min: usize,
    /// Defaults to the number of loads.
    pub k_max: Option<usize>,
    pub max_redraws: usize,
    /// New (K, attacked set) choices tried when the covariance is infeasible.
    pub max_spec_retries: usize,
    /// Load shifts for cost-maximization and line-overflow attacks.
    pub designed_tau_grid: Vec<f64>,
    pub cm: bool,
    pub lo: bool,
    pub critical_frac: f64,
    pub critical_min_lines: usize,
    /// Upper bound on critical hours attacked; a seeded subset is used when exceeded.
    pub max_critical_hours: Option<usize>,
    pub node_limit: usize,
}

pub fn percent_grid(lo: usize, hi: usize) -> Vec<f64> {
    (lo..=hi).map(|p| p as f64 / 100.0).collect()
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            random_count: 100_000,
            random_tau_grid: percent_grid(1, 20),
            k_min: 2,
            k_max: None,
            max_redraws: 100,
            max_spec_retries: 50,
            designed_tau_grid: percent_grid(1, 20),
            cm: true,
            lo: true,
            critical_frac: 0.8,
            critical_min_lines: 2,
            max_critical_hours: None,
            node_limit: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discard {
    pub kind: AttackKind,
    pub hour: usize,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BatchResult {
    pub scenarios: Vec<AttackScenario>,
    pub discards: Vec<Discard>,
    /// Critical hours that received designed attacks.
    pub critical: Vec<CriticalHour>,
    /// Critical hours found before any cap.
    pub critical_total: usize,
    pub infeasible_hours: Vec<usize>,
}

fn random_one(
    series: &[Vec<f64>],
    cfg: &AttackConfig,
    seed: u64,
    index: usize,
) -> Result<AttackScenario, (usize, f64, AttackError)> {
    let mut rng = stream(seed, domain::RANDOM_ATTACK, index as u64);
    let hour = rng.random_range(0..series.len());
    let p = &series[hour];
    let tau = cfg.random_tau_grid[rng.random_range(0..cfg.random_tau_grid.len())];
    let k_max = cfg.k_max.unwrap_or(p.len()).min(p.len());
    let mut last = None;
    for _ in 0..=cfg.max_spec_retries {
        let k = rng.random_range(cfg.k_min..=k_max);
        match random_lr_attack(p, k, tau, &mut rng, cfg.max_redraws) {
            Ok((mut s, _)) => {
                s.hour = hour;
                s.seed = Some(seed);
                return Ok(s);
            }
            // re-run with different inputs
            Err(e @ (AttackError::InfeasibleSpec(_) | AttackError::RedrawsExceeded { .. })) => last = Some(e),
            Err(e) => return Err((hour, tau, e)),
        }
    }
    Err((hour, tau, last.expect("at least one attempt")))
}

/// Random, cost-maximization and line-overflow attacks over a load series (rows are hours,
/// columns loads).
pub fn batch_generate(net: &NetworkModel, series: &[Vec<f64>], cfg: &AttackConfig, seed: u64) -> Result<BatchResult, AttackError> {
    let mut out = BatchResult::default();
    if series.is_empty() {
        return Ok(out);
    }
    if cfg.k_min < 2 || cfg.random_tau_grid.is_empty() {
        return Err(AttackError::Invalid("random attacks need k_min >= 2 and a non-empty τ grid".into()));
    }

    let random: Vec<_> = (0..cfg.random_count).into_par_iter().map(|i| random_one(series, cfg, seed, i)).collect();
    for r in random {
        match r {
            Ok(s) => out.scenarios.push(s),
            Err((hour, tau, e)) => {
                out.discards.push(Discard { kind: AttackKind::Random, hour, tau, line: None, reason: e.to_string() })
            }
        }
    }

    if !(cfg.cm || cfg.lo) || cfg.designed_tau_grid.is_empty() {
        return Ok(out);
    }
    let scan = critical_hours(net, series, cfg.critical_frac, cfg.critical_min_lines)?;
    out.critical_total = scan.critical.len();
    out.infeasible_hours = scan.infeasible;
    let mut critical = scan.critical;
    if let Some(cap) = cfg.max_critical_hours {
        if critical.len() > cap {
            let mut rng = stream(seed, domain::CRITICAL_PICK, 0);
            let mut keep = sample(&mut rng, critical.len(), cap).into_vec();
            keep.sort_unstable();
            critical = keep.into_iter().map(|i| critical[i].clone()).collect();
        }
    }
    info!("{} critical hours ({} attacked)", out.critical_total, critical.len());

    let opts = BilevelOptions { node_limit: cfg.node_limit, ..BilevelOptions::default() };
    let mut tasks: Vec<(AttackKind, usize, f64, Option<usize>)> = Vec::new();
    for ch in &critical {
        if cfg.cm {
            tasks.extend(cfg.designed_tau_grid.iter().map(|&t| (AttackKind::Cm, ch.hour, t, None)));
        }
        if cfg.lo {
            for &l in &ch.lines {
                tasks.extend(cfg.designed_tau_grid.iter().map(|&t| (AttackKind::Lo, ch.hour, t, Some(l))));
            }
        }
    }
    let designed: Vec<_> = tasks
        .par_iter()
        .map(|&(_, hour, tau, line)| {
            let p = &series[hour];
            let r = match line {
                None => cm_attack(net, p, tau, &opts),
                Some(l) => lo_attack(net, p, tau, l, &opts),
            };
            r.and_then(|o| {
                if o.scenario.is_zero() {
                    Err(AttackError::Invalid("optimal attack is zero".into()))
                } else {
                    Ok(o.scenario)
                }
            })
        })
        .collect();
    for (&(kind, hour, tau, line), r) in tasks.iter().zip(designed) {
        match r {
            Ok(mut s) => {
                s.hour = hour;
                s.seed = Some(seed);
                out.scenarios.push(s);
            }
            Err(e) => {
                if !matches!(e, AttackError::Invalid(_)) {
                    warn!("{} attack at hour {hour}, τ = {tau}: {e}", kind.label());
                }
                out.discards.push(Discard { kind, hour, tau, line, reason: e.to_string() });
            }
        }
    }
    out.critical = critical;
    Ok(out)
}
