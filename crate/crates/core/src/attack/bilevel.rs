//! Bilevel attacks with the dispatch LP replaced by its KKT conditions.
//!
//! The attacker picks load changes `d` (Σd = 0, |d_i| ≤ τP_i); any such `d` is `−Bc`
//! for some state vector `c` supported on load buses, recovered afterwards. The operator's
//! dispatch `G` must be optimal for the attacked loads, which is written as primal and
//! dual feasibility plus big-M complementarity on line and generator limits.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{state_vector_for, AttackError, AttackKind, AttackScenario};
use crate::dcopf::{Dcopf, Dispatch};
use crate::grid::NetworkModel;
use crate::linalg::dot;
use crate::opt::{solve_lp, solve_milp_with, LpProblem, MilpOptions, MilpProblem, Status};

#[derive(Clone, Debug)]
pub struct BilevelOptions {
    pub gap: f64,
    pub node_limit: usize,
    /// Initial bound on line and generator multipliers; `None` picks `10·(max cost + 1)`.
    pub dual_big_m: Option<f64>,
    /// Times the multiplier bound may double when a solution presses against it.
    pub max_doublings: usize,
}

impl Default for BilevelOptions {
    fn default() -> Self {
        Self { gap: 1e-6, node_limit: 20_000, dual_big_m: None, max_doublings: 6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BilevelOutcome {
    pub scenario: AttackScenario,
    /// Attacker objective at the optimum: cost ($/h) or |physical flow| (MW).
    pub objective: f64,
    /// Same objective without attack.
    pub baseline: f64,
    /// Operator dispatch embedded in the MILP solution.
    pub g: Vec<f64>,
    /// Dispatch re-solved at the attacked loads.
    pub redispatch: Dispatch,
    pub big_m: f64,
    pub nodes: usize,
    pub binaries: usize,
}

#[derive(Clone, Copy, Debug)]
enum Upper {
    Cost,
    Flow { line: usize, sign: f64 },
}

enum GenDual {
    Fixed { nu: usize },
    Range { nu_up: usize, y_up: usize, nu_lo: usize, y_lo: usize },
}

struct Side {
    line: usize,
    sign: f64,
    mu: usize,
    z: usize,
}

struct Model {
    milp: MilpProblem<f64>,
    sides: Vec<Side>,
    gens: Vec<GenDual>,
    nl: usize,
    ng: usize,
}

impl Model {
    fn d(&self, x: &[f64]) -> Vec<f64> {
        x[..self.nl].to_vec()
    }

    fn g(&self, x: &[f64]) -> Vec<f64> {
        x[self.nl..self.nl + self.ng].to_vec()
    }

    /// Largest multiplier value in the solution.
    fn max_dual(&self, x: &[f64]) -> f64 {
        let mut m = self.sides.iter().map(|s| x[s.mu]).fold(0.0, f64::max);
        for g in &self.gens {
            if let GenDual::Range { nu_up, nu_lo, .. } = g {
                m = m.max(x[*nu_up]).max(x[*nu_lo]);
            }
        }
        m
    }
}

/// Line sides `σ·flow ≤ F` that some admissible attack and dispatch can make binding.
fn reachable_sides(ctx: &Dcopf, p: &[f64], tau: f64) -> Result<Vec<(usize, f64)>, AttackError> {
    let net = ctx.net;
    let (nl, ng) = (net.n_loads(), net.n_gens());
    let total: f64 = p.iter().sum();
    let mut base = LpProblem::new(nl + ng);
    for i in 0..nl {
        base.set_bounds(i, -tau * p[i], tau * p[i]);
    }
    for (j, g) in net.generators.iter().enumerate() {
        base.set_bounds(nl + j, g.gmin_mw, g.gmax_mw);
    }
    let mut row = vec![0.0; nl + ng];
    row[..nl].iter_mut().for_each(|v| *v = 1.0);
    base.add_eq(&row, 0.0);
    let mut row = vec![0.0; nl + ng];
    row[nl..].iter_mut().for_each(|v| *v = 1.0);
    base.add_eq(&row, total);

    let mut sides = Vec::new();
    for (l, line) in net.lines.iter().enumerate() {
        let rl = ctx.rl.row(l);
        let rg = ctx.rg.row(l);
        let fixed = -dot(rl, p);
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; nl + ng];
            for i in 0..nl {
                c[i] = -sign * rl[i];
            }
            for j in 0..ng {
                c[nl + j] = sign * rg[j];
            }
            let mut lp = base.clone();
            lp.sense = crate::opt::Sense::Maximize;
            lp.objective = c;
            let s = solve_lp(&lp)?;
            if !s.is_optimal() {
                // no admissible dispatch at all: nothing can bind
                continue;
            }
            let reach = s.objective + sign * fixed;
            if reach >= line.rating_mw * (1.0 - 1e-9) - 1e-9 {
                sides.push((l, sign));
            }
        }
    }
    Ok(sides)
}

fn build(ctx: &Dcopf, p: &[f64], tau: f64, upper: Upper, sides_in: &[(usize, f64)], big_m: f64) -> Model {
    let net = ctx.net;
    let (nl, ng) = (net.n_loads(), net.n_gens());
    let mut n = nl + ng + 1;
    let lam = nl + ng;
    let mut sides = Vec::with_capacity(sides_in.len());
    for &(line, sign) in sides_in {
        sides.push(Side { line, sign, mu: n, z: n + 1 });
        n += 2;
    }
    let mut gens = Vec::with_capacity(ng);
    for g in &net.generators {
        if g.gmax_mw > g.gmin_mw {
            gens.push(GenDual::Range { nu_up: n, y_up: n + 1, nu_lo: n + 2, y_lo: n + 3 });
            n += 4;
        } else {
            gens.push(GenDual::Fixed { nu: n });
            n += 1;
        }
    }

    let mut lp = LpProblem::new(n);
    let mut binaries = Vec::new();
    for i in 0..nl {
        lp.set_bounds(i, -tau * p[i], tau * p[i]);
    }
    for (j, g) in net.generators.iter().enumerate() {
        lp.set_bounds(nl + j, g.gmin_mw, g.gmax_mw);
    }
    lp.set_free(lam);
    for s in &sides {
        lp.set_bounds(s.z, 0.0, 1.0);
        binaries.push(s.z);
    }
    for g in &gens {
        match *g {
            GenDual::Fixed { nu } => lp.set_free(nu),
            GenDual::Range { y_up, y_lo, .. } => {
                lp.set_bounds(y_up, 0.0, 1.0);
                lp.set_bounds(y_lo, 0.0, 1.0);
                binaries.push(y_up);
                binaries.push(y_lo);
            }
        }
    }
    let row = |entries: &[(usize, f64)]| {
        let mut r = vec![0.0; n];
        for &(i, v) in entries {
            r[i] += v;
        }
        r
    };

    // attack conserves load; dispatch meets the (unchanged) total
    lp.add_eq(&row(&(0..nl).map(|i| (i, 1.0)).collect::<Vec<_>>()), 0.0);
    lp.add_eq(&row(&(0..ng).map(|j| (nl + j, 1.0)).collect::<Vec<_>>()), p.iter().sum());

    // stationarity: a − λ + Σ σ R_g μ + ν⁺ − ν⁻ = 0
    for (j, gen) in net.generators.iter().enumerate() {
        let mut e = vec![(lam, -1.0)];
        for s in &sides {
            e.push((s.mu, s.sign * ctx.rg[(s.line, j)]));
        }
        match gens[j] {
            GenDual::Fixed { nu } => e.push((nu, 1.0)),
            GenDual::Range { nu_up, nu_lo, .. } => {
                e.push((nu_up, 1.0));
                e.push((nu_lo, -1.0));
            }
        }
        lp.add_eq(&row(&e), -gen.cost);
    }

    for s in &sides {
        let rating = net.lines[s.line].rating_mw;
        let rl = ctx.rl.row(s.line);
        let rg = ctx.rg.row(s.line);
        let fixed = dot(rl, p);
        // σ f ≤ F with f = R_g G − R_l (P + d)
        let mut e: Vec<(usize, f64)> = (0..ng).map(|j| (nl + j, s.sign * rg[j])).collect();
        e.extend((0..nl).map(|i| (i, -s.sign * rl[i])));
        lp.add_le(&row(&e), rating + s.sign * fixed);
        // μ ≤ M z
        lp.add_le(&row(&[(s.mu, 1.0), (s.z, -big_m)]), 0.0);
        // F − σ f ≤ 2F (1 − z)
        let mut e: Vec<(usize, f64)> = (0..ng).map(|j| (nl + j, -s.sign * rg[j])).collect();
        e.extend((0..nl).map(|i| (i, s.sign * rl[i])));
        e.push((s.z, 2.0 * rating));
        lp.add_le(&row(&e), rating - s.sign * fixed);
    }
    // a line cannot bind in both directions
    for (a, sa) in sides.iter().enumerate() {
        for sb in &sides[a + 1..] {
            if sb.line == sa.line {
                lp.add_le(&row(&[(sa.z, 1.0), (sb.z, 1.0)]), 1.0);
            }
        }
    }

    for (j, gen) in net.generators.iter().enumerate() {
        if let GenDual::Range { nu_up, y_up, nu_lo, y_lo } = gens[j] {
            let width = gen.gmax_mw - gen.gmin_mw;
            let gj = nl + j;
            lp.add_le(&row(&[(nu_up, 1.0), (y_up, -big_m)]), 0.0);
            lp.add_le(&row(&[(gj, -1.0), (y_up, width)]), -gen.gmin_mw);
            lp.add_le(&row(&[(nu_lo, 1.0), (y_lo, -big_m)]), 0.0);
            lp.add_le(&row(&[(gj, 1.0), (y_lo, width)]), gen.gmax_mw);
            lp.add_le(&row(&[(y_up, 1.0), (y_lo, 1.0)]), 1.0);
        }
    }

    let mut obj = vec![0.0; n];
    match upper {
        Upper::Cost => {
            for (j, g) in net.generators.iter().enumerate() {
                obj[nl + j] = g.cost;
            }
        }
        Upper::Flow { line, sign } => {
            for j in 0..ng {
                obj[nl + j] = sign * ctx.rg[(line, j)];
            }
        }
    }
    let lp = lp.maximize(obj);
    Model { milp: MilpProblem::new(lp, binaries), sides, gens, nl, ng }
}

struct Solved {
    d: Vec<f64>,
    g: Vec<f64>,
    value: f64,
    big_m: f64,
    nodes: usize,
    binaries: usize,
}

fn solve_upper(ctx: &Dcopf, p: &[f64], tau: f64, upper: Upper, opts: &BilevelOptions) -> Result<Solved, AttackError> {
    let sides = reachable_sides(ctx, p, tau)?;
    let cmax = ctx.net.generators.iter().map(|g| g.cost).fold(0.0, f64::max);
    let mut big_m = opts.dual_big_m.unwrap_or(10.0 * (cmax + 1.0));
    let milp_opts = MilpOptions { gap: opts.gap, node_limit: opts.node_limit, ..MilpOptions::default() };
    let mut doublings = 0;
    loop {
        let model = build(ctx, p, tau, upper, &sides, big_m);
        let s = solve_milp_with(&model.milp, &milp_opts)?;
        match s.status {
            Status::Optimal => {}
            Status::NodeLimit if s.has_incumbent() => {
                warn!("attack MILP hit its node limit; using the incumbent (bound {})", s.bound);
            }
            other => return Err(AttackError::Milp(other)),
        }
        let pressed = model.max_dual(&s.x) >= big_m * (1.0 - 1e-6);
        if pressed && doublings < opts.max_doublings {
            debug!("multiplier bound {big_m} is tight, doubling");
            big_m *= 2.0;
            doublings += 1;
            continue;
        }
        if pressed {
            warn!("multiplier bound {big_m} still tight after {doublings} doublings");
        }
        return Ok(Solved {
            d: model.d(&s.x),
            g: model.g(&s.x),
            value: s.objective,
            big_m,
            nodes: s.nodes,
            binaries: model.milp.binaries.len(),
        });
    }
}

/// Snaps the MILP load changes onto the attack box and restores an exact zero sum.
fn clean_delta(d: &[f64], p: &[f64], tau: f64) -> Vec<f64> {
    let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut out: Vec<f64> = d
        .iter()
        .zip(p)
        .map(|(&v, &pi)| {
            if v.abs() <= 1e-9 * scale {
                return 0.0;
            }
            let lim = tau * pi;
            let mut c = v.clamp(-lim, lim);
            while (c / pi).abs() > tau {
                c -= c.signum() * f64::EPSILON * c.abs();
            }
            c
        })
        .collect();
    let residual: f64 = out.iter().sum();
    if residual != 0.0 {
        // move the residual onto the entry with the most room in that direction
        let room = |i: usize| if residual > 0.0 { out[i] + tau * p[i] } else { tau * p[i] - out[i] };
        if let Some(i) = (0..out.len()).filter(|&i| out[i] != 0.0).max_by(|&a, &b| room(a).total_cmp(&room(b))) {
            if room(i) >= residual.abs() * 2.0 {
                out[i] -= residual;
                while (out[i] / p[i]).abs() > tau {
                    out[i] -= out[i].signum() * f64::EPSILON * out[i].abs();
                }
            }
        }
    }
    out
}

fn finish(
    ctx: &Dcopf,
    p: &[f64],
    tau: f64,
    kind: AttackKind,
    solved: Solved,
    objective: f64,
    baseline: f64,
) -> Result<BilevelOutcome, AttackError> {
    let net = ctx.net;
    let delta = clean_delta(&solved.d, p, tau);
    let mut scenario = AttackScenario::new(0, kind, p, delta, tau)?;
    scenario.c = Some(state_vector_for(net, &scenario.delta_p)?);
    scenario.objective = Some(objective);
    scenario.check(p)?;
    let redispatch = ctx.solve(&scenario.p_atk, None)?;
    if !redispatch.is_optimal() {
        return Err(AttackError::InfeasibleDispatch(redispatch.status));
    }
    let embedded = dot(&net.costs(), &solved.g);
    if (redispatch.cost - embedded).abs() > 1e-5 * (1.0 + redispatch.cost.abs()) {
        return Err(AttackError::Invariant(format!(
            "embedded dispatch cost {embedded} differs from re-solved cost {}",
            redispatch.cost
        )));
    }
    Ok(BilevelOutcome {
        scenario,
        objective,
        baseline,
        g: solved.g,
        redispatch,
        big_m: solved.big_m,
        nodes: solved.nodes,
        binaries: solved.binaries,
    })
}

/// Cost maximization: the attack that makes the re-dispatch most expensive.
pub fn cm_attack(net: &NetworkModel, p: &[f64], tau: f64, opts: &BilevelOptions) -> Result<BilevelOutcome, AttackError> {
    let ctx = Dcopf::new(net);
    check_inputs(net, p, tau)?;
    let base = ctx.solve(p, None)?;
    if !base.is_optimal() {
        return Err(AttackError::InfeasibleDispatch(base.status));
    }
    let solved = solve_upper(&ctx, p, tau, Upper::Cost, opts)?;
    let objective = solved.value;
    finish(&ctx, p, tau, AttackKind::Cm, solved, objective, base.cost)
}

/// Line overflow: the attack that maximizes the physical flow magnitude on `line` after
/// re-dispatch. Both flow directions are solved and the larger is kept.
pub fn lo_attack(
    net: &NetworkModel,
    p: &[f64],
    tau: f64,
    line: usize,
    opts: &BilevelOptions,
) -> Result<BilevelOutcome, AttackError> {
    if line >= net.n_lines() {
        return Err(AttackError::Invalid(format!("line {line} out of range (network has {})", net.n_lines())));
    }
    let ctx = Dcopf::new(net);
    check_inputs(net, p, tau)?;
    let base = ctx.solve(p, None)?;
    if !base.is_optimal() {
        return Err(AttackError::InfeasibleDispatch(base.status));
    }
    let fixed = dot(ctx.rl.row(line), p);
    let mut best: Option<(f64, Solved)> = None;
    for sign in [1.0, -1.0] {
        let solved = match solve_upper(&ctx, p, tau, Upper::Flow { line, sign }, opts) {
            Ok(s) => s,
            Err(AttackError::Milp(Status::Infeasible)) => continue,
            Err(e) => return Err(e),
        };
        // physical flow uses the true loads
        let value = solved.value - sign * fixed;
        if best.as_ref().map_or(true, |(b, _)| value > *b) {
            best = Some((value, solved));
        }
    }
    let (objective, solved) = best.ok_or(AttackError::Milp(Status::Infeasible))?;
    let mut out = finish(&ctx, p, tau, AttackKind::Lo, solved, objective, base.flows[line].abs())?;
    out.scenario.target_line = Some(line);
    Ok(out)
}

fn check_inputs(net: &NetworkModel, p: &[f64], tau: f64) -> Result<(), AttackError> {
    if p.len() != net.n_loads() {
        return Err(AttackError::Dimension(format!("{} loads for {} load buses", p.len(), net.n_loads())));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(AttackError::Invalid(format!("load shift must be non-negative, got {tau}")));
    }
    if let Some(i) = p.iter().position(|&v| v < 0.0) {
        return Err(AttackError::Invalid(format!("load {i} is negative")));
    }
    Ok(())
}
