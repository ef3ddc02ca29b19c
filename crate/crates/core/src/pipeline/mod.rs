//! Load prediction, attack detection and re-dispatch mitigation.

mod detector;
mod mitigation;
mod predictor;
mod report;
mod suite;

pub use detector::{
    bucket_tau, build_detector_samples, decisions, detector_training_set, evaluate_detector, split_samples, summarize,
    sweep_hyperparameters, tau_bucket, train_detector, verdicts, Bucket, DetectionEval, DetectorParams,
    DetectorSample, DetectorSplit, HourRecord, SweepRow, TAU_BUCKETS,
};
pub use mitigation::{
    aggregate_mitigation, hour_dispatch, mitigate, mitigate_at, HourDispatch, MitigationPoint, MitigationRecord,
};
pub use predictor::{metrics_rmse_mape, predict_loads, train_predictor, LoadModel, Metrics, PredictorBundle, SvrParams};
pub use report::{designed_detection, Counts, DesignedRow, DetectorReport, EvalReport, PredictorReport};
pub use suite::{eval_suite, SuiteConfig};

use crate::attack::AttackError;
use crate::data::DataError;
use crate::dcopf::DcopfError;
use crate::svm::SvmError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{}: {source}", match .load { Some(i) => format!("load {i}"), None => "detector".to_string() })]
    Svm { load: Option<usize>, source: SvmError },
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Dcopf(#[from] DcopfError),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
