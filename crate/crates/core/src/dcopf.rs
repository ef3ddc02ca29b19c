//! DC optimal power flow and base-case screening.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{GridError, NetworkModel};
use crate::linalg::Matrix;
use crate::opt::{solve_lp, LpProblem, OptError, Status};

#[derive(Debug, thiserror::Error)]
pub enum DcopfError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Opt(#[from] OptError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub status: Status,
    /// MW per generator.
    pub g: Vec<f64>,
    /// MW per line, positive in the from→to direction.
    pub flows: Vec<f64>,
    /// $/h.
    pub cost: f64,
}

impl Dispatch {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// PTDF restricted to generator and load buses, reused across solves on one network.
#[derive(Clone, Debug)]
pub struct Dcopf<'a> {
    pub net: &'a NetworkModel,
    /// `R·A_g`, lines × generators.
    pub rg: Matrix<f64>,
    /// `R·A_l`, lines × loads.
    pub rl: Matrix<f64>,
}

impl<'a> Dcopf<'a> {
    pub fn new(net: &'a NetworkModel) -> Self {
        let r = net.ptdf();
        let gen_buses: Vec<usize> = net.generators.iter().map(|g| g.bus).collect();
        let lines: Vec<usize> = (0..net.n_lines()).collect();
        Self { net, rg: r.select(&lines, &gen_buses), rl: r.select(&lines, &net.load_buses) }
    }

    fn check_loads(&self, loads: &[f64]) -> Result<(), DcopfError> {
        if loads.len() != self.net.n_loads() {
            return Err(DcopfError::Dimension(format!(
                "{} load values for {} load buses",
                loads.len(),
                self.net.n_loads()
            )));
        }
        Ok(())
    }

    /// Fixed bus injections `-A_l P + Bc`.
    fn fixed_injection(&self, loads: &[f64], attack_c: Option<&[f64]>) -> Result<Vec<f64>, DcopfError> {
        self.check_loads(loads)?;
        let net = self.net;
        let mut w = vec![0.0; net.n_buses()];
        for (&b, &p) in net.load_buses.iter().zip(loads) {
            w[b] -= p;
        }
        if let Some(c) = attack_c {
            if c.len() != net.n_buses() {
                return Err(DcopfError::Dimension(format!("attack vector has {} entries for {} buses", c.len(), net.n_buses())));
            }
            for (wi, bc) in w.iter_mut().zip(net.b().mul_vec(c)) {
                *wi += bc;
            }
        }
        Ok(w)
    }

    /// The dispatch LP for fixed bus injections `w`: `min aᵀG` with balance, flow limits and
    /// generator bounds.
    pub fn lp_for_injection(&self, w: &[f64]) -> LpProblem<f64> {
        let net = self.net;
        let ng = net.n_gens();
        let mut lp = LpProblem::new(ng).minimize(net.costs());
        for (j, g) in net.generators.iter().enumerate() {
            lp.set_bounds(j, g.gmin_mw, g.gmax_mw);
        }
        lp.add_eq(&vec![1.0; ng], -w.iter().sum::<f64>());
        let base = net.ptdf().mul_vec(w);
        for (l, line) in net.lines.iter().enumerate() {
            let row = self.rg.row(l);
            lp.add_le(row, line.rating_mw - base[l]);
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            lp.add_le(&neg, line.rating_mw + base[l]);
        }
        lp
    }

    pub fn lp(&self, loads: &[f64], attack_c: Option<&[f64]>) -> Result<LpProblem<f64>, DcopfError> {
        Ok(self.lp_for_injection(&self.fixed_injection(loads, attack_c)?))
    }

    pub fn solve(&self, loads: &[f64], attack_c: Option<&[f64]>) -> Result<Dispatch, DcopfError> {
        let w = self.fixed_injection(loads, attack_c)?;
        let lp = self.lp_for_injection(&w);
        let s = solve_lp(&lp)?;
        let ng = self.net.n_gens();
        if !s.is_optimal() {
            return Ok(Dispatch { status: s.status, g: vec![0.0; ng], flows: vec![0.0; self.net.n_lines()], cost: f64::NAN });
        }
        let mut inj = w;
        for (g, &v) in self.net.generators.iter().zip(&s.x) {
            inj[g.bus] += v;
        }
        let flows = self.net.ptdf().mul_vec(&inj);
        Ok(Dispatch { status: Status::Optimal, cost: s.objective, g: s.x, flows })
    }

    /// Physical flows `R(A_g G − A_l P)` when dispatch `g` serves `true_loads`.
    pub fn evaluate_flows(&self, g: &[f64], true_loads: &[f64]) -> Result<Vec<f64>, DcopfError> {
        let inj = self.net.injections(g, true_loads)?;
        Ok(self.net.ptdf().mul_vec(&inj))
    }
}

pub fn solve_dcopf(net: &NetworkModel, loads: &[f64], attack_c: Option<&[f64]>) -> Result<Dispatch, DcopfError> {
    Dcopf::new(net).solve(loads, attack_c)
}

pub fn evaluate_flows(net: &NetworkModel, g: &[f64], true_loads: &[f64]) -> Result<Vec<f64>, DcopfError> {
    let inj = net.injections(g, true_loads)?;
    Ok(net.ptdf().mul_vec(&inj))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalHour {
    /// Position in the screened series.
    pub hour: usize,
    pub lines: Vec<usize>,
    pub dispatch: Dispatch,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalScan {
    pub critical: Vec<CriticalHour>,
    /// Hours whose base-case DCOPF has no optimal solution.
    pub infeasible: Vec<usize>,
}

/// Lines with `|flow| > frac · rating`.
pub fn loaded_lines(net: &NetworkModel, flows: &[f64], frac: f64) -> Vec<usize> {
    net.lines.iter().zip(flows).enumerate().filter(|(_, (l, f))| f.abs() > frac * l.rating_mw).map(|(k, _)| k).collect()
}

/// Base-case screening: an hour is critical when at least `min_lines` lines exceed `frac`
/// of their rating.
pub fn critical_hours(net: &NetworkModel, series: &[Vec<f64>], frac: f64, min_lines: usize) -> Result<CriticalScan, DcopfError> {
    let ctx = Dcopf::new(net);
    let results: Vec<Result<Dispatch, DcopfError>> = series.par_iter().map(|p| ctx.solve(p, None)).collect();
    let mut scan = CriticalScan::default();
    for (hour, r) in results.into_iter().enumerate() {
        let d = r?;
        if !d.is_optimal() {
            warn!("hour {hour}: base-case DCOPF is {:?}, skipped", d.status);
            scan.infeasible.push(hour);
            continue;
        }
        let lines = loaded_lines(net, &d.flows, frac);
        if lines.len() >= min_lines && !lines.is_empty() {
            scan.critical.push(CriticalHour { hour, lines, dispatch: d });
        }
    }
    Ok(scan)
}
