//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

pub mod qp;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Network read straight from the JSON document, positions follow the `buses` array.
#[derive(Clone, Debug)]
pub struct RawNet {
    pub n: usize,
    pub slack: usize,
    /// (from, to, x, rating)
    pub lines: Vec<(usize, usize, f64, f64)>,
    /// (bus, cost, gmin, gmax)
    pub gens: Vec<(usize, f64, f64, f64)>,
    pub loads: Vec<usize>,
}

impl RawNet {
    pub fn read(name: &str) -> Self {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap();
        let ids: Vec<u64> = v["buses"].as_array().unwrap().iter().map(|b| b["id"].as_u64().unwrap()).collect();
        let pos = |id: &serde_json::Value| ids.iter().position(|&i| i == id.as_u64().unwrap()).unwrap();
        RawNet {
            n: ids.len(),
            slack: pos(&v["slack_bus"]),
            lines: v["lines"]
                .as_array()
                .unwrap()
                .iter()
                .map(|l| (pos(&l["from"]), pos(&l["to"]), l["x"].as_f64().unwrap(), l["rating_mw"].as_f64().unwrap()))
                .collect(),
            gens: v["generators"]
                .as_array()
                .unwrap()
                .iter()
                .map(|g| {
                    (pos(&g["bus"]), g["cost"].as_f64().unwrap(), g["gmin_mw"].as_f64().unwrap(), g["gmax_mw"].as_f64().unwrap())
                })
                .collect(),
            loads: v["load_buses"].as_array().unwrap().iter().map(&pos).collect(),
        }
    }

    pub fn bmat(&self) -> Vec<Vec<f64>> {
        let mut b = vec![vec![0.0; self.n]; self.n];
        for &(f, t, x, _) in &self.lines {
            b[f][f] += 1.0 / x;
            b[t][t] += 1.0 / x;
            b[f][t] -= 1.0 / x;
            b[t][f] -= 1.0 / x;
        }
        b
    }

    /// Flows for a bus injection vector, by solving for angles with θ_slack = 0.
    pub fn flows(&self, inj: &[f64]) -> Vec<f64> {
        let b = self.bmat();
        let keep: Vec<usize> = (0..self.n).filter(|&i| i != self.slack).collect();
        let a: Vec<Vec<f64>> = keep.iter().map(|&i| keep.iter().map(|&j| b[i][j]).collect()).collect();
        let rhs: Vec<f64> = keep.iter().map(|&i| inj[i]).collect();
        let th_red = gauss_solve(a, rhs).expect("connected");
        let mut th = vec![0.0; self.n];
        for (k, &i) in keep.iter().enumerate() {
            th[i] = th_red[k];
        }
        self.lines.iter().map(|&(f, t, x, _)| (th[f] - th[t]) / x).collect()
    }

    /// Line-by-generator flow sensitivities and the flows of the fixed injection `w`.
    pub fn gen_sensitivity(&self) -> Vec<Vec<f64>> {
        let ng = self.gens.len();
        let mut cols = Vec::with_capacity(ng);
        for g in 0..ng {
            let mut inj = vec![0.0; self.n];
            inj[self.gens[g].0] = 1.0;
            cols.push(self.flows(&inj));
        }
        (0..self.lines.len()).map(|l| (0..ng).map(|g| cols[g][l]).collect()).collect()
    }

    pub fn load_injection(&self, loads: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        for (&b, &p) in self.loads.iter().zip(loads) {
            w[b] -= p;
        }
        w
    }
}

pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub cost: f64,
    pub g: Vec<f64>,
    pub flows: Vec<f64>,
}

/// Every basic feasible dispatch of the DCOPF at `loads`.
pub fn dcopf_vertices(net: &RawNet, loads: &[f64]) -> Vec<Vertex> {
    let ng = net.gens.len();
    let w = net.load_injection(loads);
    let base = net.flows(&w);
    let sens = net.gen_sensitivity();
    let demand: f64 = loads.iter().sum();
    // inequality rows a·g <= b
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (l, &(_, _, _, rating)) in net.lines.iter().enumerate() {
        rows.push((sens[l].clone(), rating - base[l]));
        rows.push((sens[l].iter().map(|v| -v).collect(), rating + base[l]));
    }
    for (j, &(_, _, lo, hi)) in net.gens.iter().enumerate() {
        let mut e = vec![0.0; ng];
        e[j] = 1.0;
        rows.push((e.clone(), hi));
        e[j] = -1.0;
        rows.push((e, -lo));
    }
    let mut out = Vec::new();
    for active in combinations(rows.len(), ng - 1) {
        let mut a = vec![vec![1.0; ng]];
        let mut b = vec![demand];
        for &i in &active {
            a.push(rows[i].0.clone());
            b.push(rows[i].1);
        }
        let Some(g) = gauss_solve(a, b) else { continue };
        let ok = rows.iter().all(|(r, rhs)| r.iter().zip(&g).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-7);
        if ok {
            let cost = net.gens.iter().zip(&g).map(|(gen, v)| gen.1 * v).sum();
            let mut inj = w.clone();
            for (gen, v) in net.gens.iter().zip(&g) {
                inj[gen.0] += v;
            }
            out.push(Vertex { cost, flows: net.flows(&inj), g });
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub enum UpperObjective {
    Cost,
    /// Physical flow on the line times the sign.
    Flow(usize, f64),
}

/// Bilevel optimum by enumerating every active set of the dispatch problem: each line at its
/// upper limit, lower limit or free, each generator at max, min or interior. For a fixed
/// active set the KKT system is linear in (c, G, multipliers), so one LP per pattern gives
/// the best attacker value consistent with that pattern. The attack is parametrized by the
/// state vector c (slack angle fixed), with −Bc confined to load buses.
pub fn bilevel_by_enumeration(net: &RawNet, p: &[f64], tau: f64, upper: UpperObjective) -> Option<f64> {
    use lrshield::opt::{solve_lp, LpProblem};
    let n = net.n;
    let nl = net.lines.len();
    let ng = net.gens.len();
    let b = net.bmat();
    // PTDF columns by unit injections
    let ptdf_cols: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            net.flows(&e)
        })
        .collect();
    let ptdf = |l: usize, bus: usize| ptdf_cols[bus][l];
    let w = net.load_injection(p);
    let base: Vec<f64> = (0..nl).map(|l| (0..n).map(|i| ptdf(l, i) * w[i]).sum()).collect();
    let cs: Vec<usize> = (0..n).filter(|&i| i != net.slack).collect();
    // flow sensitivity to c: PTDF · B
    let fc: Vec<Vec<f64>> = (0..nl).map(|l| cs.iter().map(|&k| (0..n).map(|i| ptdf(l, i) * b[i][k]).sum()).collect()).collect();
    let fg: Vec<Vec<f64>> = (0..nl).map(|l| net.gens.iter().map(|g| ptdf(l, g.0)).collect()).collect();

    let mut best: Option<f64> = None;
    let patterns_lines = 3usize.pow(nl as u32);
    let patterns_gens = 3usize.pow(ng as u32);
    for pl in 0..patterns_lines {
        let line_state: Vec<usize> = (0..nl).map(|l| (pl / 3usize.pow(l as u32)) % 3).collect();
        for pg in 0..patterns_gens {
            let gen_state: Vec<usize> = (0..ng).map(|j| (pg / 3usize.pow(j as u32)) % 3).collect();
            // variables: c (cs), G, λ, μ per active line, ν per active gen
            let nc = cs.len();
            let ig = nc;
            let ilam = nc + ng;
            let mut nv = ilam + 1;
            let mu: Vec<Option<usize>> = line_state
                .iter()
                .map(|&s| {
                    if s == 0 {
                        None
                    } else {
                        nv += 1;
                        Some(nv - 1)
                    }
                })
                .collect();
            let nu: Vec<Option<usize>> = gen_state
                .iter()
                .map(|&s| {
                    if s == 0 {
                        None
                    } else {
                        nv += 1;
                        Some(nv - 1)
                    }
                })
                .collect();
            let mut obj = vec![0.0; nv];
            match upper {
                UpperObjective::Cost => {
                    for j in 0..ng {
                        obj[ig + j] = net.gens[j].1;
                    }
                }
                UpperObjective::Flow(l, s) => {
                    for j in 0..ng {
                        obj[ig + j] = s * fg[l][j];
                    }
                }
            }
            let mut lp = LpProblem::new(nv).maximize(obj);
            for k in 0..nc {
                lp.set_free(k);
            }
            lp.set_free(ilam);
            for (j, &(_, _, lo, hi)) in net.gens.iter().enumerate() {
                match gen_state[j] {
                    0 => lp.set_bounds(ig + j, lo, hi),
                    1 => lp.set_bounds(ig + j, hi, hi),
                    _ => lp.set_bounds(ig + j, lo, lo),
                }
            }
            // Bc at non-load buses is zero; at load buses bounded by the attack box
            for i in 0..n {
                let row: Vec<f64> = {
                    let mut r = vec![0.0; nv];
                    for (k, &ck) in cs.iter().enumerate() {
                        r[k] = b[i][ck];
                    }
                    r
                };
                match net.loads.iter().position(|&lb| lb == i) {
                    None => lp.add_eq(&row, 0.0),
                    Some(li) => {
                        lp.add_le(&row, tau * p[li]);
                        lp.add_ge(&row, -tau * p[li]);
                    }
                }
            }
            let mut bal = vec![0.0; nv];
            for j in 0..ng {
                bal[ig + j] = 1.0;
            }
            lp.add_eq(&bal, p.iter().sum());
            for l in 0..nl {
                let mut r = vec![0.0; nv];
                for k in 0..nc {
                    r[k] = fc[l][k];
                }
                for j in 0..ng {
                    r[ig + j] = fg[l][j];
                }
                let rating = net.lines[l].3;
                match line_state[l] {
                    0 => {
                        lp.add_le(&r, rating - base[l]);
                        lp.add_ge(&r, -rating - base[l]);
                    }
                    1 => lp.add_eq(&r, rating - base[l]),
                    _ => lp.add_eq(&r, -rating - base[l]),
                }
            }
            for j in 0..ng {
                let mut r = vec![0.0; nv];
                r[ilam] = -1.0;
                for l in 0..nl {
                    if let Some(m) = mu[l] {
                        r[m] += if line_state[l] == 1 { fg[l][j] } else { -fg[l][j] };
                    }
                }
                if let Some(v) = nu[j] {
                    r[v] = if gen_state[j] == 1 { 1.0 } else { -1.0 };
                }
                lp.add_eq(&r, -net.gens[j].1);
            }
            let s = solve_lp(&lp).unwrap();
            if s.is_optimal() {
                let mut v = s.objective;
                if let UpperObjective::Flow(l, sg) = upper {
                    v += sg * base[l];
                }
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best
}
