//! DC network model: susceptance matrix, PTDF and line flows.

pub mod matpower;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{Lu, Matrix};
use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("network disconnected: reduced susceptance matrix is singular")]
    Disconnected,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// On-disk network document. Bus references use the external bus ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
    pub generators: Vec<GeneratorRecord>,
    pub slack_bus: usize,
    pub load_buses: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub from: usize,
    pub to: usize,
    pub x: f64,
    pub rating_mw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub bus: usize,
    pub cost: f64,
    pub gmin_mw: f64,
    pub gmax_mw: f64,
}

/// Line between internal bus positions `from` and `to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub x: f64,
    pub rating_mw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub cost: f64,
    pub gmin_mw: f64,
    pub gmax_mw: f64,
}

/// Validated network with precomputed `B` and PTDF `R`.
///
/// Buses are stored by position (`0..n_buses`); `bus_ids` keeps the external numbering.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    pub name: String,
    pub bus_ids: Vec<usize>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub slack: usize,
    /// Bus position of each load, in load-index order.
    pub load_buses: Vec<usize>,
    b: Matrix<f64>,
    r: Matrix<f64>,
}

impl NetworkModel {
    pub fn from_file(file: &NetworkFile) -> Result<Self, GridError> {
        if file.buses.is_empty() {
            return Err(GridError::Invalid("network has no buses".into()));
        }
        let mut pos = HashMap::new();
        for (i, b) in file.buses.iter().enumerate() {
            if pos.insert(b.id, i).is_some() {
                return Err(GridError::Invalid(format!("duplicate bus id {}", b.id)));
            }
        }
        let lookup = |id: usize, what: &str| {
            pos.get(&id).copied().ok_or_else(|| GridError::Invalid(format!("{what} refers to unknown bus {id}")))
        };

        let mut lines = Vec::with_capacity(file.lines.len());
        for (k, l) in file.lines.iter().enumerate() {
            let from = lookup(l.from, &format!("line {k} endpoint"))?;
            let to = lookup(l.to, &format!("line {k} endpoint"))?;
            if from == to {
                return Err(GridError::Invalid(format!("line {k} connects bus {} to itself", l.from)));
            }
            if !(l.x > 0.0 && l.x.is_finite()) {
                return Err(GridError::Invalid(format!("line {k} reactance must be strictly positive, got {}", l.x)));
            }
            if !(l.rating_mw > 0.0 && l.rating_mw.is_finite()) {
                return Err(GridError::Invalid(format!("line {k} rating must be strictly positive, got {}", l.rating_mw)));
            }
            lines.push(Line { from, to, x: l.x, rating_mw: l.rating_mw });
        }

        let mut generators = Vec::with_capacity(file.generators.len());
        for (k, g) in file.generators.iter().enumerate() {
            let bus = lookup(g.bus, &format!("generator {k}"))?;
            if !(g.cost >= 0.0) {
                return Err(GridError::Invalid(format!("generator {k} cost must be non-negative, got {}", g.cost)));
            }
            if !(g.gmin_mw <= g.gmax_mw) || !g.gmin_mw.is_finite() || !g.gmax_mw.is_finite() {
                return Err(GridError::Invalid(format!(
                    "generator {k} needs gmin_mw <= gmax_mw, got {} > {}",
                    g.gmin_mw, g.gmax_mw
                )));
            }
            generators.push(Generator { bus, cost: g.cost, gmin_mw: g.gmin_mw, gmax_mw: g.gmax_mw });
        }

        let slack = lookup(file.slack_bus, "slack_bus")?;
        let mut load_buses = Vec::with_capacity(file.load_buses.len());
        for &id in &file.load_buses {
            let p = lookup(id, "load_buses")?;
            if load_buses.contains(&p) {
                return Err(GridError::Invalid(format!("load bus {id} listed twice")));
            }
            load_buses.push(p);
        }

        let mut net = Self {
            name: file.name.clone(),
            bus_ids: file.buses.iter().map(|b| b.id).collect(),
            lines,
            generators,
            slack,
            load_buses,
            b: Matrix::zeros(0, 0),
            r: Matrix::zeros(0, 0),
        };
        net.b = susceptance_matrix(&net);
        net.r = ptdf_matrix(&net)?;
        Ok(net)
    }

    pub fn to_file(&self) -> NetworkFile {
        let id = |p: usize| self.bus_ids[p];
        NetworkFile {
            name: self.name.clone(),
            source: None,
            buses: self.bus_ids.iter().map(|&id| BusRecord { id }).collect(),
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord { from: id(l.from), to: id(l.to), x: l.x, rating_mw: l.rating_mw })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorRecord { bus: id(g.bus), cost: g.cost, gmin_mw: g.gmin_mw, gmax_mw: g.gmax_mw })
                .collect(),
            slack_bus: id(self.slack),
            load_buses: self.load_buses.iter().map(|&p| id(p)).collect(),
        }
    }

    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_gens(&self) -> usize {
        self.generators.len()
    }

    pub fn n_loads(&self) -> usize {
        self.load_buses.len()
    }

    pub fn is_load_bus(&self, bus: usize) -> bool {
        self.load_buses.contains(&bus)
    }

    pub fn b(&self) -> &Matrix<f64> {
        &self.b
    }

    pub fn ptdf(&self) -> &Matrix<f64> {
        &self.r
    }

    pub fn ratings(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.rating_mw).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.generators.iter().map(|g| g.cost).collect()
    }

    /// Bus-level injection vector from per-generator output and per-load demand.
    pub fn injections(&self, gen: &[f64], loads: &[f64]) -> Result<Vec<f64>, GridError> {
        if gen.len() != self.n_gens() || loads.len() != self.n_loads() {
            return Err(GridError::Dimension(format!(
                "expected {} generator and {} load values, got {} and {}",
                self.n_gens(),
                self.n_loads(),
                gen.len(),
                loads.len()
            )));
        }
        let mut inj = vec![0.0; self.n_buses()];
        for (g, &v) in self.generators.iter().zip(gen) {
            inj[g.bus] += v;
        }
        for (&b, &v) in self.load_buses.iter().zip(loads) {
            inj[b] -= v;
        }
        Ok(inj)
    }

    /// Load-bus entries of a bus vector, in load-index order.
    pub fn at_loads(&self, bus_values: &[f64]) -> Vec<f64> {
        self.load_buses.iter().map(|&b| bus_values[b]).collect()
    }
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkModel, GridError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io { path: shown.clone(), source })?;
    let file: NetworkFile = serde_json::from_str(&text).map_err(|e| GridError::Parse {
        path: shown,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    NetworkModel::from_file(&file)
}

/// `B[i][j] = -Σ 1/x` over lines `i–j`; diagonal entries make every row sum to zero.
pub fn susceptance_matrix<T: Real>(net: &NetworkModel) -> Matrix<T> {
    let n = net.n_buses();
    let mut b = Matrix::zeros(n, n);
    for l in &net.lines {
        let y = T::one() / T::of(l.x);
        b[(l.from, l.to)] -= y;
        b[(l.to, l.from)] -= y;
        b[(l.from, l.from)] += y;
        b[(l.to, l.to)] += y;
    }
    b
}

/// Line-by-bus PTDF with the slack bus absorbing the imbalance (zero slack column).
pub fn ptdf_matrix<T: Real>(net: &NetworkModel) -> Result<Matrix<T>, GridError> {
    let n = net.n_buses();
    let keep: Vec<usize> = (0..n).filter(|&i| i != net.slack).collect();
    let b = susceptance_matrix::<T>(net);
    let reduced = b.select(&keep, &keep);
    let lu = Lu::factor(&reduced).map_err(|_| GridError::Disconnected)?;
    let inv = lu.inverse();
    // the factorization only certifies a nonzero pivot; also require a sane condition
    let scale = reduced.max_abs().max(T::one());
    if inv.max_abs() * scale > T::of(1.0) / T::epsilon().sqrt() {
        return Err(GridError::Disconnected);
    }
    let mut r = Matrix::zeros(net.n_lines(), n);
    for (k, l) in net.lines.iter().enumerate() {
        let y = T::one() / T::of(l.x);
        for (c, &bus) in keep.iter().enumerate() {
            let mut theta_diff = T::zero();
            if let Some(pf) = keep.iter().position(|&v| v == l.from) {
                theta_diff += inv[(pf, c)];
            }
            if let Some(pt) = keep.iter().position(|&v| v == l.to) {
                theta_diff -= inv[(pt, c)];
            }
            r[(k, bus)] = y * theta_diff;
        }
    }
    Ok(r)
}

/// `R · injections` in MW per line.
pub fn line_flows(net: &NetworkModel, injections: &[f64]) -> Result<Vec<f64>, GridError> {
    if injections.len() != net.n_buses() {
        return Err(GridError::Dimension(format!(
            "injection vector has {} entries, network has {} buses",
            injections.len(),
            net.n_buses()
        )));
    }
    Ok(net.ptdf().mul_vec(injections))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn file(n: usize, lines: &[(usize, usize, f64, f64)], loads: &[usize]) -> NetworkFile {
        NetworkFile {
            name: "t".into(),
            source: None,
            buses: (1..=n).map(|id| BusRecord { id }).collect(),
            lines: lines.iter().map(|&(from, to, x, rating_mw)| LineRecord { from, to, x, rating_mw }).collect(),
            generators: vec![GeneratorRecord { bus: 1, cost: 1.0, gmin_mw: 0.0, gmax_mw: 100.0 }],
            slack_bus: 1,
            load_buses: loads.to_vec(),
        }
    }

    #[test]
    fn two_bus_susceptance() {
        let net = NetworkModel::from_file(&file(2, &[(1, 2, 0.5, 10.0)], &[2])).unwrap();
        assert_eq!(net.b().as_slice(), &[2.0, -2.0, -2.0, 2.0]);
    }

    #[test]
    fn triangle_susceptance() {
        let net = NetworkModel::from_file(&file(3, &[(1, 2, 1.0, 1.0), (2, 3, 1.0, 1.0), (1, 3, 1.0, 1.0)], &[2, 3])).unwrap();
        let expect = [2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0];
        assert_eq!(net.b().as_slice(), &expect);
    }

    #[test]
    fn two_bus_unit_injection() {
        let net = NetworkModel::from_file(&file(2, &[(1, 2, 0.5, 10.0)], &[2])).unwrap();
        let f = line_flows(&net, &[0.0, 1.0]).unwrap();
        assert!((f[0] + 1.0).abs() < 1e-12);
        assert_eq!(net.ptdf().column(0), vec![0.0]);
    }

    #[test]
    fn zero_rating_is_rejected() {
        let err = NetworkModel::from_file(&file(2, &[(1, 2, 0.5, 0.0)], &[2])).unwrap_err();
        assert!(err.to_string().contains("rating"), "{err}");
    }

    #[test]
    fn islanded_bus_is_disconnected() {
        let err = NetworkModel::from_file(&file(3, &[(1, 2, 0.5, 1.0)], &[2])).unwrap_err();
        assert!(matches!(err, GridError::Disconnected));
    }

    #[test]
    fn unknown_endpoint_is_rejected() {
        assert!(NetworkModel::from_file(&file(2, &[(1, 5, 0.5, 1.0)], &[2])).is_err());
    }

    #[test]
    fn flow_dimension_checked() {
        let net = NetworkModel::from_file(&file(2, &[(1, 2, 0.5, 10.0)], &[2])).unwrap();
        assert!(matches!(line_flows(&net, &[1.0]), Err(GridError::Dimension(_))));
    }
}
