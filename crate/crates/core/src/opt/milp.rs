//! Best-first branch and bound over LP relaxations for problems with binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::opt::lp::{solve_lp_with, LpOptions, LpProblem};
use crate::opt::{OptError, Sense, Status};
use crate::scalar::Real;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MilpProblem<T> {
    pub lp: LpProblem<T>,
    pub binaries: Vec<usize>,
}

impl<T: Real> MilpProblem<T> {
    pub fn new(lp: LpProblem<T>, binaries: Vec<usize>) -> Self {
        Self { lp, binaries }
    }

    pub fn validate(&self) -> Result<(), OptError> {
        self.lp.validate()?;
        for &j in &self.binaries {
            if j >= self.lp.num_vars() || self.lp.lower[j] < T::zero() || self.lp.upper[j] > T::one() {
                return Err(OptError::Binary(j));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MilpOptions<T> {
    /// Relative optimality gap at which the search stops.
    pub gap: T,
    pub node_limit: usize,
    pub int_tol: T,
    pub lp: LpOptions<T>,
}

impl<T: Real> Default for MilpOptions<T> {
    fn default() -> Self {
        Self { gap: T::tol(1e-6), node_limit: 200_000, int_tol: T::tol(1e-6), lp: LpOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MilpSolution<T> {
    pub status: Status,
    pub x: Vec<T>,
    pub objective: T,
    /// Best bound still open when the search stopped (equals `objective` when closed).
    pub bound: T,
    pub nodes: usize,
    pub branches: usize,
}

impl<T: Real> MilpSolution<T> {
    pub fn has_incumbent(&self) -> bool {
        matches!(self.status, Status::Optimal) || (self.status == Status::NodeLimit && self.objective.is_finite())
    }
}

pub fn solve_milp<T: Real>(p: &MilpProblem<T>, gap: T) -> Result<MilpSolution<T>, OptError> {
    let opts = MilpOptions { gap, ..MilpOptions::default() };
    solve_milp_with(p, &opts)
}

struct Node<T> {
    /// minimization-form LP bound
    bound: T,
    id: usize,
    lower: Vec<T>,
    upper: Vec<T>,
    x: Vec<T>,
}

impl<T: Real> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Node<T> {}
impl<T: Real> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Node<T> {
    // max-heap: smallest bound first, then oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub fn solve_milp_with<T: Real>(p: &MilpProblem<T>, opts: &MilpOptions<T>) -> Result<MilpSolution<T>, OptError> {
    p.validate()?;
    let n = p.lp.num_vars();
    let sign = match p.lp.sense {
        Sense::Minimize => T::one(),
        Sense::Maximize => -T::one(),
    };
    let mut work = p.lp.clone();

    let mut nodes = 0usize;
    let mut branches = 0usize;
    let mut next_id = 0usize;

    let mut solve_node = |lower: Vec<T>, upper: Vec<T>, work: &mut LpProblem<T>| -> Result<Option<Node<T>>, OptError> {
        work.lower.clone_from(&lower);
        work.upper.clone_from(&upper);
        let s = solve_lp_with(work, &opts.lp)?;
        let id = next_id;
        next_id += 1;
        match s.status {
            Status::Optimal => Ok(Some(Node { bound: sign * s.objective, id, lower, upper, x: s.x })),
            Status::Infeasible => Ok(None),
            Status::Unbounded => Err(OptError::Invalid("LP relaxation is unbounded".into())),
            Status::NodeLimit => unreachable!("LP never reports a node limit"),
        }
    };

    let root = solve_node(p.lp.lower.clone(), p.lp.upper.clone(), &mut work);
    let root = match root {
        Err(OptError::Invalid(_)) => {
            return Ok(MilpSolution {
                status: Status::Unbounded,
                x: vec![T::zero(); n],
                objective: T::nan(),
                bound: T::nan(),
                nodes: 1,
                branches: 0,
            })
        }
        other => other?,
    };
    let Some(root) = root else {
        return Ok(MilpSolution {
            status: Status::Infeasible,
            x: vec![T::zero(); n],
            objective: T::nan(),
            bound: T::nan(),
            nodes: 1,
            branches: 0,
        });
    };

    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut incumbent: Option<(T, Vec<T>)> = None;
    let half = T::of(0.5);

    let closes = |bound: T, inc: T| -> bool {
        let scale = inc.abs().max(T::one());
        inc - bound <= opts.gap * scale
    };

    let mut hit_limit = false;
    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if closes(node.bound, *inc) {
                heap.push(node);
                break;
            }
        }
        nodes += 1;
        if nodes > opts.node_limit {
            heap.push(node);
            hit_limit = true;
            break;
        }

        // most fractional binary, ties to the lowest index
        let mut pick: Option<(usize, T)> = None;
        for &j in &p.binaries {
            let v = node.x[j];
            let frac = (v - v.round()).abs();
            if frac <= opts.int_tol {
                continue;
            }
            let dist = (v - half).abs();
            if pick.map_or(true, |(_, best)| dist < best) {
                pick = Some((j, dist));
            }
        }

        let Some((j, _)) = pick else {
            if incumbent.as_ref().map_or(true, |(inc, _)| node.bound < *inc) {
                let mut x = node.x;
                for &b in &p.binaries {
                    x[b] = x[b].round();
                }
                incumbent = Some((node.bound, x));
            }
            continue;
        };

        branches += 1;
        for value in [T::zero(), T::one()] {
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            lower[j] = value;
            upper[j] = value;
            if let Some(child) = solve_node(lower, upper, &mut work)? {
                if incumbent.as_ref().map_or(true, |(inc, _)| !closes(child.bound, *inc)) {
                    heap.push(child);
                }
            }
        }
    }

    let open_bound = heap.peek().map(|n| n.bound);
    match incumbent {
        Some((obj_min, x)) => {
            let bound_min = open_bound.map_or(obj_min, |b| b.min(obj_min));
            let status = if hit_limit && !closes(bound_min, obj_min) { Status::NodeLimit } else { Status::Optimal };
            let objective = crate::linalg::dot(&p.lp.objective, &x);
            Ok(MilpSolution { status, x, objective, bound: sign * bound_min, nodes, branches })
        }
        None => {
            let status = if hit_limit { Status::NodeLimit } else { Status::Infeasible };
            Ok(MilpSolution {
                status,
                x: vec![T::zero(); n],
                objective: T::nan(),
                bound: open_bound.map_or(T::nan(), |b| sign * b),
                nodes,
                branches,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_lp(n: usize) -> LpProblem<f64> {
        let mut lp = LpProblem::new(n);
        for j in 0..n {
            lp.set_bounds(j, 0.0, 1.0);
        }
        lp
    }

    #[test]
    fn picks_one_of_two() {
        let mut lp = binary_lp(2).maximize(vec![1.0, 1.0]);
        lp.add_le(&[1.0, 1.0], 1.0);
        let s = solve_milp(&MilpProblem::new(lp, vec![0, 1]), 1e-6).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integral_relaxation_needs_no_branching() {
        let mut lp = binary_lp(3).maximize(vec![3.0, 2.0, 1.0]);
        lp.add_le(&[1.0, 0.0, 0.0], 1.0);
        let s = solve_milp(&MilpProblem::new(lp, vec![0, 1, 2]), 1e-6).unwrap();
        assert_eq!(s.branches, 0);
        assert_eq!(s.nodes, 1);
        assert!((s.objective - 6.0).abs() < 1e-12);
    }

    #[test]
    fn knapsack_needs_branching() {
        // max 5a + 4b + 3c, 2a + 3b + c <= 5 -> a=1, b=1 (value 9) vs a=1,c=1 (8) ; relaxation fractional
        let mut lp = binary_lp(3).maximize(vec![5.0, 4.0, 3.0]);
        lp.add_le(&[2.0, 3.0, 1.0], 5.0);
        let s = solve_milp(&MilpProblem::new(lp, vec![0, 1, 2]), 0.0).unwrap();
        assert!((s.objective - 9.0).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn infeasible_integer_problem() {
        let mut lp = binary_lp(2).minimize(vec![1.0, 1.0]);
        lp.add_eq(&[2.0, 2.0], 1.0);
        let s = solve_milp(&MilpProblem::new(lp, vec![0, 1]), 1e-6).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn node_limit_reports_incumbent() {
        let n = 12;
        let mut lp = binary_lp(n).maximize((0..n).map(|j| 1.0 + j as f64 * 0.1).collect());
        lp.add_le(&(0..n).map(|j| 1.0 + (j % 3) as f64 * 0.7).collect::<Vec<_>>(), 6.3);
        let opts = MilpOptions { node_limit: 2, gap: 0.0, ..MilpOptions::default() };
        let s = solve_milp_with(&MilpProblem::new(lp, (0..n).collect()), &opts).unwrap();
        assert!(matches!(s.status, Status::NodeLimit | Status::Optimal));
    }

    #[test]
    fn rejects_bad_binary() {
        let lp = LpProblem::<f64>::new(1);
        assert!(matches!(solve_milp(&MilpProblem::new(lp, vec![0]), 1e-6), Err(OptError::Binary(0))));
    }
}
