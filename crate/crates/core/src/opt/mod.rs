//! Optimization kernels: dense LP, branch-and-bound MILP and PSD matrix construction.

pub mod lp;
pub mod milp;
pub mod psd;

use serde::{Deserialize, Serialize};

pub use lp::{solve_lp, solve_lp_with, Duals, LpOptions, LpProblem, Solution};
pub use milp::{solve_milp, solve_milp_with, MilpOptions, MilpProblem, MilpSolution};
pub use psd::{constrained_psd, project_psd, PsdOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Branch-and-bound stopped at its node limit; the incumbent (if any) is returned.
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("variable {0} has lower bound above upper bound")]
    Bounds(usize),
    #[error("variable {0} is declared binary but is not a valid [0, 1] column")]
    Binary(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("no matrix satisfies the diagonal, zero-sum and PSD constraints (residual {residual:e} after {iterations} iterations)")]
    PsdInfeasible { residual: f64, iterations: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}
