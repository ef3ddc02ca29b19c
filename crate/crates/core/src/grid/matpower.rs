//! Reader for MATPOWER version 2 case files (`mpc.bus`, `mpc.gen`, `mpc.branch`, `mpc.gencost`).

use std::path::Path;

use super::{BusRecord, GeneratorRecord, GridError, LineRecord, NetworkFile};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatpowerCase {
    pub base_mva: f64,
    pub bus: Vec<Vec<f64>>,
    pub gen: Vec<Vec<f64>>,
    pub branch: Vec<Vec<f64>>,
    pub gencost: Vec<Vec<f64>>,
}

// column positions in the MATPOWER tables
const BUS_I: usize = 0;
const BUS_TYPE: usize = 1;
const PD: usize = 2;
const GEN_BUS: usize = 0;
const GEN_STATUS: usize = 7;
const PMAX: usize = 8;
const PMIN: usize = 9;
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const BR_STATUS: usize = 10;

pub fn read_matpower(path: impl AsRef<Path>) -> Result<MatpowerCase, GridError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io { path: shown.clone(), source })?;
    parse_matpower(&text).map_err(|e| match e {
        GridError::Parse { line, column, message, .. } => GridError::Parse { path: shown, line, column, message },
        other => other,
    })
}

fn parse_err(line: usize, message: String) -> GridError {
    GridError::Parse { path: "<input>".into(), line, column: 1, message }
}

fn push_rows(body: &str, name: &str, lineno: usize, rows: &mut Vec<Vec<f64>>) -> Result<(), GridError> {
    for chunk in body.split(';') {
        let values: Result<Vec<f64>, _> =
            chunk.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(str::parse).collect();
        let values = values.map_err(|e| parse_err(lineno, format!("bad number in mpc.{name}: {e}")))?;
        if values.is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(parse_err(
                    lineno,
                    format!("mpc.{name} row has {} columns, expected {}", values.len(), first.len()),
                ));
            }
        }
        rows.push(values);
    }
    Ok(())
}

fn store(case: &mut MatpowerCase, name: &str, rows: Vec<Vec<f64>>) {
    match name {
        "bus" => case.bus = rows,
        "gen" => case.gen = rows,
        "branch" => case.branch = rows,
        "gencost" => case.gencost = rows,
        _ => {}
    }
}

pub fn parse_matpower(text: &str) -> Result<MatpowerCase, GridError> {
    let mut case = MatpowerCase::default();
    // table being read: name and rows so far
    let mut current: Option<(String, Vec<Vec<f64>>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let body = if let Some((name, rows)) = current.as_mut() {
            let body = line.split(']').next().unwrap_or("");
            push_rows(body, name, lineno, rows)?;
            line
        } else {
            let Some(rest) = line.strip_prefix("mpc.") else { continue };
            let Some((name, value)) = rest.split_once('=') else { continue };
            let name = name.trim();
            let value = value.trim();
            if let Some(after) = value.strip_prefix('[') {
                let mut rows = Vec::new();
                push_rows(after.split(']').next().unwrap_or(""), name, lineno, &mut rows)?;
                current = Some((name.to_string(), rows));
                after
            } else {
                if name == "baseMVA" {
                    let v = value.trim_end_matches(';').trim();
                    case.base_mva = v.parse().map_err(|e| parse_err(lineno, format!("bad baseMVA: {e}")))?;
                }
                continue;
            }
        };
        if body.contains(']') {
            let (name, rows) = current.take().expect("open table");
            store(&mut case, &name, rows);
        }
    }
    if let Some((name, _)) = current {
        return Err(parse_err(text.lines().count(), format!("mpc.{name} is never closed")));
    }
    if case.bus.is_empty() || case.branch.is_empty() || case.gen.is_empty() {
        return Err(parse_err(1, "case needs non-empty mpc.bus, mpc.gen and mpc.branch".into()));
    }
    Ok(case)
}

fn column(rows: &[Vec<f64>], col: usize, table: &str) -> Result<(), GridError> {
    match rows.iter().position(|r| r.len() <= col) {
        Some(i) => Err(GridError::Invalid(format!("mpc.{table} row {} has no column {}", i + 1, col + 1))),
        None => Ok(()),
    }
}

impl MatpowerCase {
    /// Linear cost per generator: the first-order coefficient of polynomial costs, the
    /// first segment slope of piecewise-linear ones.
    pub fn linear_costs(&self) -> Result<Vec<f64>, GridError> {
        if self.gencost.is_empty() {
            return Ok(vec![0.0; self.gen.len()]);
        }
        let mut out = Vec::with_capacity(self.gen.len());
        for (i, row) in self.gencost.iter().take(self.gen.len()).enumerate() {
            let bad = || GridError::Invalid(format!("mpc.gencost row {} is malformed", i + 1));
            let model = *row.first().ok_or_else(bad)?;
            let n = *row.get(3).ok_or_else(bad)? as usize;
            let coef = &row[4..];
            let c = if model == 2.0 {
                if n < 2 {
                    0.0
                } else {
                    *coef.get(n - 2).ok_or_else(bad)?
                }
            } else if model == 1.0 {
                let (x0, y0, x1, y1) = (coef.first(), coef.get(1), coef.get(2), coef.get(3));
                match (x0, y0, x1, y1) {
                    (Some(x0), Some(y0), Some(x1), Some(y1)) if x1 > x0 => (y1 - y0) / (x1 - x0),
                    _ => return Err(bad()),
                }
            } else {
                return Err(bad());
            };
            out.push(c);
        }
        if out.len() != self.gen.len() {
            return Err(GridError::Invalid("mpc.gencost has fewer rows than mpc.gen".into()));
        }
        Ok(out)
    }

    /// Network document with in-service branches and generators, the reference bus as slack
    /// and buses with positive demand as loads (in bus order).
    pub fn to_network_file(&self, name: &str) -> Result<NetworkFile, GridError> {
        column(&self.bus, PD, "bus")?;
        column(&self.gen, PMIN, "gen")?;
        column(&self.branch, BR_STATUS, "branch")?;
        let costs = self.linear_costs()?;
        let id = |v: f64| v as usize;
        let slack = self
            .bus
            .iter()
            .find(|r| r[BUS_TYPE] == 3.0)
            .map(|r| id(r[BUS_I]))
            .ok_or_else(|| GridError::Invalid("case has no reference bus".into()))?;
        Ok(NetworkFile {
            name: name.to_string(),
            source: None,
            buses: self.bus.iter().map(|r| BusRecord { id: id(r[BUS_I]) }).collect(),
            lines: self
                .branch
                .iter()
                .filter(|r| r[BR_STATUS] > 0.0)
                .map(|r| LineRecord { from: id(r[F_BUS]), to: id(r[T_BUS]), x: r[BR_X], rating_mw: r[RATE_A] })
                .collect(),
            generators: self
                .gen
                .iter()
                .zip(&costs)
                .filter(|(r, _)| r[GEN_STATUS] > 0.0)
                .map(|(r, &cost)| GeneratorRecord { bus: id(r[GEN_BUS]), cost, gmin_mw: r[PMIN], gmax_mw: r[PMAX] })
                .collect(),
            slack_bus: slack,
            load_buses: self.bus.iter().filter(|r| r[PD] > 0.0).map(|r| id(r[BUS_I])).collect(),
        })
    }

    /// Demand at each load bus of [`to_network_file`](Self::to_network_file), in MW.
    pub fn loads_mw(&self) -> Vec<f64> {
        self.bus.iter().filter(|r| r[PD] > 0.0).map(|r| r[PD]).collect()
    }
}
