use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{AttackKind, AttackScenario};
use crate::linalg::Matrix;
use crate::rng::{domain, stream};
use crate::svm::{label_of, train_svm, KernelSpec, SmoOptions, Standardizer, SvmModel};

use super::PipelineError;

/// Everything the detector sees about one hour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HourRecord {
    pub series_row: usize,
    /// `[mo, wd, hr]` of the hour the prediction was made from.
    pub time: [f64; 3],
    pub predicted: Vec<f64>,
    pub observed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSample {
    /// `[mo, wd, hr, P̂, P_observed]`.
    pub u: Vec<f64>,
    /// −1 normal, +1 attacked.
    pub v: i8,
    pub series_row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<AttackKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_real: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_requested: Option<f64>,
    /// Position of the scenario in the list the sample was built from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<usize>,
}

impl DetectorSample {
    pub fn is_attacked(&self) -> bool {
        self.v > 0
    }

    /// τ bucket: realized shift for random attacks, requested shift for designed ones.
    pub fn bucket(&self) -> Option<usize> {
        match self.kind? {
            AttackKind::Random => self.tau_real.map(tau_bucket),
            _ => self.tau_requested.map(tau_bucket),
        }
    }
}

pub const TAU_BUCKETS: usize = 20;

/// Bucket k (1..=20) holds shifts in ((k−1)%, k%].
pub fn tau_bucket(tau: f64) -> usize {
    ((tau * 100.0 - 1e-9).ceil().max(1.0) as usize).min(TAU_BUCKETS)
}

pub fn bucket_tau(k: usize) -> f64 {
    k as f64 / 100.0
}

/// One normal sample per hour followed by one attacked sample per scenario. Scenario hours
/// are series rows and must belong to one of `hours`.
pub fn build_detector_samples(hours: &[HourRecord], scenarios: &[AttackScenario]) -> Result<Vec<DetectorSample>, PipelineError> {
    let index: HashMap<usize, usize> = hours.iter().enumerate().map(|(i, h)| (h.series_row, i)).collect();
    let mut out = Vec::with_capacity(hours.len() + scenarios.len());
    for h in hours {
        if h.predicted.len() != h.observed.len() {
            return Err(PipelineError::Invalid(format!("hour {}: prediction and observation lengths differ", h.series_row)));
        }
        out.push(DetectorSample {
            u: sample_vector(&h.time, &h.predicted, &h.observed),
            v: -1,
            series_row: h.series_row,
            kind: None,
            tau_real: None,
            tau_requested: None,
            scenario: None,
        });
    }
    for (k, s) in scenarios.iter().enumerate() {
        let &i = index.get(&s.hour).ok_or_else(|| {
            PipelineError::Invalid(format!("scenario {k} falsifies hour {} which has no prediction", s.hour))
        })?;
        let h = &hours[i];
        if s.p_atk.len() != h.observed.len() {
            return Err(PipelineError::Invalid(format!("scenario {k}: {} loads, expected {}", s.p_atk.len(), h.observed.len())));
        }
        out.push(DetectorSample {
            u: sample_vector(&h.time, &h.predicted, &s.p_atk),
            v: 1,
            series_row: s.hour,
            kind: Some(s.kind),
            tau_real: Some(s.tau_real),
            tau_requested: Some(s.tau_requested),
            scenario: Some(k),
        });
    }
    Ok(out)
}

fn sample_vector(t: &[f64; 3], predicted: &[f64], observed: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(3 + 2 * predicted.len());
    u.extend_from_slice(t);
    u.extend_from_slice(predicted);
    u.extend_from_slice(observed);
    u
}

/// Sample indices of the train/test partition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorSplit {
    pub normal_train: Vec<usize>,
    pub normal_test: Vec<usize>,
    pub attacked_train: Vec<usize>,
    pub attacked_test: Vec<usize>,
}

impl DetectorSplit {
    pub fn normal_all(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.normal_train.iter().chain(&self.normal_test).copied().collect();
        v.sort_unstable();
        v
    }
}

fn take_fraction(mut idx: Vec<usize>, frac: f64, seed: u64, key: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream(seed, domain::SPLIT, key);
    idx.shuffle(&mut rng);
    let n = ((idx.len() as f64) * frac).round() as usize;
    let mut test = idx.split_off(n.min(idx.len()));
    idx.sort_unstable();
    test.sort_unstable();
    (idx, test)
}

/// Random `train_frac` split of the normal samples and a per-bucket split of the attacked
/// ones, so every bucket appears on both sides when it has two or more samples.
pub fn split_samples(samples: &[DetectorSample], train_frac: f64, seed: u64) -> Result<DetectorSplit, PipelineError> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(PipelineError::Invalid(format!("train fraction {train_frac} outside [0, 1]")));
    }
    let normal: Vec<usize> = (0..samples.len()).filter(|&i| !samples[i].is_attacked()).collect();
    let (normal_train, normal_test) = take_fraction(normal, train_frac, seed, 0);
    let mut by_bucket: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        if s.is_attacked() {
            by_bucket.entry(s.bucket().unwrap_or(0)).or_default().push(i);
        }
    }
    let mut split = DetectorSplit { normal_train, normal_test, ..Default::default() };
    for (b, idx) in by_bucket {
        let (tr, te) = take_fraction(idx, train_frac, seed, 1 + b as u64);
        split.attacked_train.extend(tr);
        split.attacked_test.extend(te);
    }
    split.attacked_train.sort_unstable();
    split.attacked_test.sort_unstable();
    Ok(split)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub c: f64,
    pub tau_min: f64,
    /// Normal training samples kept (seeded subsample); all when `None`.
    pub max_normal_train: Option<usize>,
    pub tol: f64,
    pub max_iter: u64,
    pub cache_mb: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self { c: 2000.0, tau_min: 0.03, max_normal_train: None, tol: 1e-3, max_iter: 10_000_000, cache_mb: 1024 }
    }
}

/// Training samples for one detector: all normal training samples (or a seeded subsample)
/// and the attacked training samples with τ_r ≥ τ_min.
pub fn detector_training_set(samples: &[DetectorSample], split: &DetectorSplit, params: &DetectorParams, seed: u64) -> Vec<usize> {
    let mut normal = split.normal_train.clone();
    if let Some(cap) = params.max_normal_train {
        if normal.len() > cap {
            let mut rng = stream(seed, domain::SUBSAMPLE, 1);
            normal.shuffle(&mut rng);
            normal.truncate(cap);
        }
    }
    let attacked = split
        .attacked_train
        .iter()
        .copied()
        .filter(|&i| samples[i].tau_real.is_some_and(|t| t >= params.tau_min));
    let mut idx: Vec<usize> = normal.into_iter().chain(attacked).collect();
    idx.sort_unstable();
    idx
}

/// SVM on standardized samples with σ = 1/q; the scaler is stored in the model.
pub fn train_detector(samples: &[DetectorSample], train: &[usize], params: &DetectorParams) -> Result<SvmModel<f64>, PipelineError> {
    if !train.iter().any(|&i| samples[i].is_attacked()) {
        return Err(PipelineError::Invalid(format!("no attacked training samples with τ_r >= {}", params.tau_min)));
    }
    let q = samples.first().map_or(0, |s| s.u.len());
    let rows: Vec<Vec<f64>> = train.iter().map(|&i| samples[i].u.clone()).collect();
    let u = Matrix::from_rows(&rows);
    let scaler = Standardizer::fit(&u, None).ok_or_else(|| PipelineError::Invalid("empty training set".into()))?;
    let v: Vec<i8> = train.iter().map(|&i| samples[i].v).collect();
    let opts = SmoOptions { tol: params.tol, max_iter: params.max_iter, cache_mb: params.cache_mb };
    let mut model = train_svm(&scaler.apply(&u), &v, params.c, KernelSpec::rbf(1.0 / q as f64), &opts)
        .map_err(|source| PipelineError::Svm { load: None, source })?;
    model.scaling = Some(scaler);
    Ok(model)
}

/// Decision values for the given samples (the model's scaler applied first).
pub fn decisions(model: &SvmModel<f64>, samples: &[DetectorSample], idx: &[usize]) -> Result<Vec<f64>, PipelineError> {
    if let Some(&i) = idx.iter().find(|&&i| samples[i].u.len() != model.dim()) {
        return Err(PipelineError::Invalid(format!("sample {i} has {} features, model {}", samples[i].u.len(), model.dim())));
    }
    Ok(idx
        .par_iter()
        .map(|&i| {
            let u = match &model.scaling {
                Some(s) => s.apply_row(&samples[i].u),
                None => samples[i].u.clone(),
            };
            model.decision_unchecked(&u)
        })
        .collect())
}

pub fn verdicts(model: &SvmModel<f64>, samples: &[DetectorSample], idx: &[usize]) -> Result<Vec<i8>, PipelineError> {
    Ok(decisions(model, samples, idx)?.into_iter().map(label_of).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub tau: f64,
    pub n: usize,
    pub detected: usize,
    /// Absent when the bucket is empty.
    pub probability: Option<f64>,
    pub missed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEval {
    /// Share of the given normal samples flagged as attacked.
    pub false_alarm: f64,
    pub specificity: f64,
    pub normal: usize,
    pub buckets: Vec<Bucket>,
}

/// Per-bucket detection and false alarm from labels (−1/+1) of normal and attacked samples.
pub fn summarize(normal: &[i8], attacked: &[(usize, i8)]) -> DetectionEval {
    let flagged = normal.iter().filter(|&&l| l > 0).count();
    let false_alarm = if normal.is_empty() { 0.0 } else { flagged as f64 / normal.len() as f64 };
    let mut counts = vec![(0usize, 0usize); TAU_BUCKETS + 1];
    for &(b, l) in attacked {
        let b = b.min(TAU_BUCKETS);
        counts[b].0 += 1;
        if l > 0 {
            counts[b].1 += 1;
        }
    }
    let buckets = (1..=TAU_BUCKETS)
        .map(|k| {
            let (n, d) = counts[k];
            let p = (n > 0).then(|| d as f64 / n as f64);
            Bucket { tau: bucket_tau(k), n, detected: d, probability: p, missed: p.map(|p| 1.0 - p) }
        })
        .collect();
    DetectionEval { false_alarm, specificity: 1.0 - false_alarm, normal: normal.len(), buckets }
}

/// Labels the given normal and attacked samples and summarizes them per τ bucket.
pub fn evaluate_detector(
    model: &SvmModel<f64>,
    samples: &[DetectorSample],
    normal: &[usize],
    attacked: &[usize],
) -> Result<DetectionEval, PipelineError> {
    let ln = verdicts(model, samples, normal)?;
    let la = verdicts(model, samples, attacked)?;
    let keyed: Vec<(usize, i8)> = attacked.iter().zip(la).map(|(&i, l)| (samples[i].bucket().unwrap_or(0), l)).collect();
    Ok(summarize(&ln, &keyed))
}

/// One detector per grid cell, evaluated on the attacked test samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    pub tau_min: f64,
    pub train_normal: usize,
    pub train_attacked: usize,
    pub support_vectors: usize,
    pub iterations: u64,
    /// Misclassified share of the training samples.
    pub train_error: f64,
    /// Over all normal samples.
    pub false_alarm: f64,
    pub false_alarm_test: f64,
    pub buckets: Vec<Bucket>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn sweep_hyperparameters(
    samples: &[DetectorSample],
    split: &DetectorSplit,
    grid: &[(f64, f64)],
    base: &DetectorParams,
    seed: u64,
) -> Vec<SweepRow> {
    let normal_all = split.normal_all();
    grid.iter()
        .map(|&(c, tau_min)| {
            let params = DetectorParams { c, tau_min, ..base.clone() };
            let train = detector_training_set(samples, split, &params, seed);
            let train_attacked = train.iter().filter(|&&i| samples[i].is_attacked()).count();
            let mut row = SweepRow {
                c,
                tau_min,
                train_normal: train.len() - train_attacked,
                train_attacked,
                support_vectors: 0,
                iterations: 0,
                train_error: f64::NAN,
                false_alarm: f64::NAN,
                false_alarm_test: f64::NAN,
                buckets: Vec::new(),
                error: None,
            };
            let result = train_detector(samples, &train, &params).and_then(|model| {
                let lt = verdicts(&model, samples, &train)?;
                let wrong = lt.iter().zip(&train).filter(|(&l, &i)| l != samples[i].v).count();
                let all = evaluate_detector(&model, samples, &normal_all, &split.attacked_test)?;
                let test = evaluate_detector(&model, samples, &split.normal_test, &[])?;
                Ok((model, wrong as f64 / train.len() as f64, all, test))
            });
            match result {
                Ok((model, err, all, test)) => {
                    row.support_vectors = model.beta.len();
                    row.iterations = model.stats.iterations;
                    row.train_error = err;
                    row.false_alarm = all.false_alarm;
                    row.false_alarm_test = test.false_alarm;
                    row.buckets = all.buckets;
                }
                Err(e) => {
                    log::warn!("sweep cell C = {c}, τ_min = {tau_min}: {e}");
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect()
}
