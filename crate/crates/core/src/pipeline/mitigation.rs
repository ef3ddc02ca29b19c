use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attack::{AttackKind, AttackScenario};
use crate::dcopf::{Dcopf, Dispatch};
use crate::grid::NetworkModel;

use super::detector::tau_bucket;
use super::PipelineError;

/// Consequences of one attack with and without re-dispatch on predicted loads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationRecord {
    pub kind: AttackKind,
    pub hour: usize,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_line: Option<usize>,
    pub detected: bool,
    /// `aᵀG_normal` ($/h).
    pub base_cost: f64,
    /// `aᵀ(G_Atk − G_normal)`.
    pub cost_increase_atk: f64,
    /// `aᵀ(G_SVR − G_normal)`.
    pub cost_increase_svr: f64,
    /// `R(G − P_normal)` for each dispatch.
    pub flows_normal: Vec<f64>,
    pub flows_atk: Vec<f64>,
    pub flows_svr: Vec<f64>,
    pub ratings: Vec<f64>,
}

impl MitigationRecord {
    pub fn cost_with_framework(&self) -> f64 {
        if self.detected {
            self.cost_increase_svr
        } else {
            self.cost_increase_atk
        }
    }

    pub fn flows_with_framework(&self) -> &[f64] {
        if self.detected {
            &self.flows_svr
        } else {
            &self.flows_atk
        }
    }

    fn cost_pct(&self, inc: f64) -> f64 {
        100.0 * inc / self.base_cost
    }

    fn line_pct(&self, flows: &[f64]) -> f64 {
        let l = self.target_line.unwrap_or(0);
        100.0 * flows[l].abs() / self.ratings[l]
    }

    /// Cost increase in percent of the base cost (CM) or target-line loading in percent of
    /// its rating (LO), without the framework.
    pub fn consequence_atk(&self) -> f64 {
        match self.kind {
            AttackKind::Lo => self.line_pct(&self.flows_atk),
            _ => self.cost_pct(self.cost_increase_atk),
        }
    }

    pub fn consequence_svr(&self) -> f64 {
        match self.kind {
            AttackKind::Lo => self.line_pct(&self.flows_svr),
            _ => self.cost_pct(self.cost_increase_svr),
        }
    }

    pub fn consequence_with_framework(&self) -> f64 {
        if self.detected {
            self.consequence_svr()
        } else {
            self.consequence_atk()
        }
    }

    /// Cost up by more than 1% (CM) or the target line strictly above its rating (LO).
    pub fn has_consequence(&self) -> bool {
        match self.kind {
            AttackKind::Lo => self.line_pct(&self.flows_atk) > 100.0,
            _ => self.cost_pct(self.cost_increase_atk) > 1.0,
        }
    }
}

fn optimal(d: Dispatch, what: &str) -> Result<Dispatch, PipelineError> {
    if d.is_optimal() {
        Ok(d)
    } else {
        Err(PipelineError::Infeasible(format!("DCOPF on {what} loads is {:?}", d.status)))
    }
}

/// Dispatches for true loads and predicted loads at one hour, shared by all its scenarios.
pub struct HourDispatch {
    pub normal: Dispatch,
    pub svr: Dispatch,
    pub flows_normal: Vec<f64>,
    pub flows_svr: Vec<f64>,
}

pub fn hour_dispatch(ctx: &Dcopf, p_true: &[f64], p_svr: &[f64]) -> Result<HourDispatch, PipelineError> {
    let normal = optimal(ctx.solve(p_true, None)?, "true")?;
    let svr = optimal(ctx.solve(p_svr, None)?, "predicted")?;
    let flows_normal = ctx.evaluate_flows(&normal.g, p_true)?;
    let flows_svr = ctx.evaluate_flows(&svr.g, p_true)?;
    Ok(HourDispatch { normal, svr, flows_normal, flows_svr })
}

pub fn mitigate_at(
    ctx: &Dcopf,
    hour: &HourDispatch,
    scenario: &AttackScenario,
    p_true: &[f64],
    detected: bool,
) -> Result<MitigationRecord, PipelineError> {
    let atk = optimal(ctx.solve(&scenario.p_atk, None)?, "attacked")?;
    let costs = ctx.net.costs();
    let cost = |g: &[f64]| g.iter().zip(&costs).map(|(a, b)| a * b).sum::<f64>();
    let base = cost(&hour.normal.g);
    Ok(MitigationRecord {
        kind: scenario.kind,
        hour: scenario.hour,
        tau: scenario.tau_requested,
        target_line: scenario.target_line,
        detected,
        base_cost: base,
        cost_increase_atk: cost(&atk.g) - base,
        cost_increase_svr: cost(&hour.svr.g) - base,
        flows_normal: hour.flows_normal.clone(),
        flows_atk: ctx.evaluate_flows(&atk.g, p_true)?,
        flows_svr: hour.flows_svr.clone(),
        ratings: ctx.net.ratings(),
    })
}

/// Runs the three dispatches (true, attacked and predicted loads) for one scenario.
pub fn mitigate(
    net: &NetworkModel,
    scenario: &AttackScenario,
    p_true: &[f64],
    p_svr: &[f64],
    detected: bool,
) -> Result<MitigationRecord, PipelineError> {
    let ctx = Dcopf::new(net);
    let hour = hour_dispatch(&ctx, p_true, p_svr)?;
    mitigate_at(&ctx, &hour, scenario, p_true, detected)
}

/// Worst consequence per attack kind and τ, without (red) and with (blue) the framework.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationPoint {
    pub kind: AttackKind,
    pub tau: f64,
    pub n: usize,
    pub detected: usize,
    pub red: f64,
    pub blue: f64,
}

impl MitigationPoint {
    pub fn all_detected(&self) -> bool {
        self.detected == self.n
    }
}

/// Buckets by requested τ; empty buckets are left out.
pub fn aggregate_mitigation(records: &[MitigationRecord]) -> Vec<MitigationPoint> {
    let mut groups: BTreeMap<(AttackKind, usize), Vec<&MitigationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.kind, tau_bucket(r.tau))).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((kind, b), rs)| MitigationPoint {
            kind,
            tau: b as f64 / 100.0,
            n: rs.len(),
            detected: rs.iter().filter(|r| r.detected).count(),
            red: rs.iter().map(|r| r.consequence_atk()).fold(f64::NEG_INFINITY, f64::max),
            blue: rs.iter().map(|r| r.consequence_with_framework()).fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}
