//! Load-redistribution attacks on DC power-system models, support-vector load prediction
//! and attack detection, and re-dispatch mitigation.

pub mod attack;
pub mod data;
pub mod dcopf;
pub mod grid;
pub mod linalg;
pub mod opt;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod svm;

pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type SvrModel = svm::SvrModel<f64>;
pub type SvrModel32 = svm::SvrModel<f32>;
pub type SvmModel = svm::SvmModel<f64>;
pub type SvmModel32 = svm::SvmModel<f32>;
pub type KernelSpec = svm::KernelSpec<f64>;
pub type LpProblem = opt::LpProblem<f64>;
pub type MilpProblem = opt::MilpProblem<f64>;
