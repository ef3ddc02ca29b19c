//! Load redistribution attacks: random (covariance-shaped draws), cost maximization and
//! line overflow (bilevel, solved as a MILP).

mod batch;
mod bilevel;
mod random;

pub use batch::{batch_generate, AttackConfig, BatchResult, Discard};
pub use bilevel::{cm_attack, lo_attack, BilevelOptions, BilevelOutcome};
pub use random::{covariance_factor, random_lr_attack, random_lr_attack_within, sample_gamma, RandomAttackSpec};

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dcopf::DcopfError;
use crate::grid::NetworkModel;
use crate::linalg::Lu;
use crate::opt::{OptError, Status};

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("load {index} is zero but its change is {delta}; the load shift is undefined")]
    UndefinedShift { index: usize, delta: f64 },
    #[error("attack touches non-load bus {bus} (injection change {delta})")]
    NonLoadBus { bus: usize, delta: f64 },
    #[error("infeasible spec: {0}")]
    InfeasibleSpec(OptError),
    #[error("no draw within the load shift after {tries} tries (last τ_r = {last_tau})")]
    RedrawsExceeded { tries: usize, last_tau: f64 },
    #[error("attack MILP ended with status {0:?}")]
    Milp(Status),
    #[error("dispatch at the attacked loads is {0:?}; attack discarded")]
    InfeasibleDispatch(Status),
    #[error("scenario invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Dcopf(#[from] DcopfError),
    #[error("scenario archive: {0}")]
    Archive(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Random,
    Cm,
    Lo,
}

impl AttackKind {
    pub fn label(self) -> &'static str {
        match self {
            AttackKind::Random => "random",
            AttackKind::Cm => "cm",
            AttackKind::Lo => "lo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    /// Row of the load series the attack falsifies.
    pub hour: usize,
    pub kind: AttackKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    pub delta_p: Vec<f64>,
    pub p_atk: Vec<f64>,
    pub tau_requested: f64,
    pub tau_real: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacked: Option<Vec<usize>>,
    /// Upper-level objective of CM/LO attacks (cost in $/h, or |flow| in MW).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl AttackScenario {
    /// Builds a scenario from true loads and a load change, computing `P_Atk` and `τ_r`.
    pub fn new(hour: usize, kind: AttackKind, p: &[f64], delta_p: Vec<f64>, tau_requested: f64) -> Result<Self, AttackError> {
        if p.len() != delta_p.len() {
            return Err(AttackError::Dimension(format!("{} loads, {} load changes", p.len(), delta_p.len())));
        }
        let tau_real = load_shift(p, &delta_p)?;
        let p_atk = p.iter().zip(&delta_p).map(|(a, b)| a + b).collect();
        Ok(Self {
            hour,
            kind,
            c: None,
            delta_p,
            p_atk,
            tau_requested,
            tau_real,
            target_line: None,
            k: None,
            attacked: None,
            objective: None,
            seed: None,
            config_hash: None,
        })
    }

    /// Conservation, `P_Atk = P + ΔP` and `τ_r = max|ΔP/P| ≤ τ`.
    pub fn check(&self, p: &[f64]) -> Result<(), AttackError> {
        let n = p.len();
        if self.delta_p.len() != n || self.p_atk.len() != n {
            return Err(AttackError::Invariant("vector lengths differ from the load count".into()));
        }
        let sum: f64 = self.delta_p.iter().sum();
        let l1: f64 = self.delta_p.iter().map(|v| v.abs()).sum();
        if l1 == 0.0 {
            if sum != 0.0 {
                return Err(AttackError::Invariant("zero change with nonzero sum".into()));
            }
        } else if sum.abs() > 1e-6 * l1 {
            return Err(AttackError::Invariant(format!("load changes sum to {sum:e} (Σ|ΔP| = {l1:e})")));
        }
        for i in 0..n {
            if self.p_atk[i] != p[i] + self.delta_p[i] {
                return Err(AttackError::Invariant(format!("P_Atk[{i}] != P[{i}] + ΔP[{i}]")));
            }
        }
        let tau = load_shift(p, &self.delta_p)?;
        if tau != self.tau_real {
            return Err(AttackError::Invariant(format!("stored τ_r {} but recomputed {tau}", self.tau_real)));
        }
        if self.tau_real > self.tau_requested {
            return Err(AttackError::Invariant(format!("τ_r {} exceeds τ {}", self.tau_real, self.tau_requested)));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.delta_p.iter().all(|&v| v == 0.0)
    }
}

/// `max_i |ΔP_i / P_i|`.
pub fn load_shift(p: &[f64], delta_p: &[f64]) -> Result<f64, AttackError> {
    if p.len() != delta_p.len() {
        return Err(AttackError::Dimension(format!("{} loads, {} load changes", p.len(), delta_p.len())));
    }
    let mut tau = 0.0f64;
    for (i, (&pi, &di)) in p.iter().zip(delta_p).enumerate() {
        if di == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Err(AttackError::UndefinedShift { index: i, delta: di });
        }
        tau = tau.max((di / pi).abs());
    }
    Ok(tau)
}

/// `ΔP = −Bc` at the load buses. Vectors that change injections elsewhere are rejected.
pub fn apply_attack_vector(net: &NetworkModel, c: &[f64]) -> Result<Vec<f64>, AttackError> {
    if c.len() != net.n_buses() {
        return Err(AttackError::Dimension(format!("attack vector has {} entries for {} buses", c.len(), net.n_buses())));
    }
    let bc = net.b().mul_vec(c);
    let scale = bc.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    for (bus, &v) in bc.iter().enumerate() {
        if !net.is_load_bus(bus) && v.abs() > 1e-9 * scale {
            return Err(AttackError::NonLoadBus { bus: net.bus_ids[bus], delta: -v });
        }
    }
    Ok(net.load_buses.iter().map(|&b| -bc[b]).collect())
}

/// State vector with `c_slack = 0` whose `−Bc` equals `delta_p` at the load buses and zero elsewhere.
pub fn state_vector_for(net: &NetworkModel, delta_p: &[f64]) -> Result<Vec<f64>, AttackError> {
    if delta_p.len() != net.n_loads() {
        return Err(AttackError::Dimension(format!("{} load changes for {} loads", delta_p.len(), net.n_loads())));
    }
    let n = net.n_buses();
    let mut target = vec![0.0; n];
    for (&b, &d) in net.load_buses.iter().zip(delta_p) {
        target[b] = -d;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != net.slack).collect();
    let reduced = net.b().select(&keep, &keep);
    let lu = Lu::factor(&reduced).map_err(|_| AttackError::Invalid("network disconnected".into()))?;
    let rhs: Vec<f64> = keep.iter().map(|&i| target[i]).collect();
    let sol = lu.solve(&rhs);
    let mut c = vec![0.0; n];
    for (k, &i) in keep.iter().enumerate() {
        c[i] = sol[k];
    }
    Ok(c)
}

pub fn write_jsonl<W: Write>(mut w: W, scenarios: &[AttackScenario]) -> Result<(), AttackError> {
    for s in scenarios {
        let line = serde_json::to_string(s).map_err(|e| AttackError::Archive(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| AttackError::Archive(e.to_string()))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<AttackScenario>, AttackError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| AttackError::Archive(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AttackError::Archive(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}
