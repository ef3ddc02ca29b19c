use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{NaiveDate, NaiveDateTime};
use lrshield::attack::AttackConfig;
use lrshield::data::{FeatureConfig, SynthConfig};
use lrshield::pipeline::{DetectorParams, SuiteConfig, SvrParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Problems with the configuration itself; the binary exits with status 2 on these.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Network document; the bundled IEEE 30-bus case when absent.
    pub network: Option<PathBuf>,
    /// Load CSVs; synthetic data when empty.
    pub data: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub variant: u8,
    pub s: Option<usize>,
    pub d: Option<usize>,
    /// First hour of the test side.
    pub split: NaiveDateTime,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            variant: 2,
            s: None,
            d: None,
            split: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date").and_hms_opt(0, 0, 0).expect("valid time"),
        }
    }
}

impl FeatureSection {
    pub fn config(&self) -> Result<FeatureConfig, ConfigError> {
        let base = FeatureConfig::variant(self.variant).map_err(|e| ConfigError(format!("features.variant: {e}")))?;
        let cfg = FeatureConfig { variant: self.variant, s: self.s.unwrap_or(base.s), d: self.d.unwrap_or(base.d) };
        cfg.validate().map_err(|e| ConfigError(format!("features: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSection {
    /// Seeded subsample of the training rows; all rows when absent.
    pub max_train_rows: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub train_frac: f64,
    /// (C, τ_min) cells of the detector sweep.
    pub sweep: Vec<(f64, f64)>,
    pub suite: SuiteConfig,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let mut sweep = Vec::new();
        for c in [20.0, 200.0, 2000.0] {
            for t in [0.01, 0.02, 0.03, 0.04, 0.05] {
                sweep.push((c, t));
            }
        }
        Self { train_frac: 0.8, sweep, suite: SuiteConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; signed so that a negative value can be reported rather than rejected by the parser.
    pub seed: i64,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub features: FeatureSection,
    pub svr: SvrParams,
    pub predictor: PredictorSection,
    pub attacks: AttackConfig,
    pub detector: DetectorParams,
    pub evaluation: EvaluationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            paths: Paths::default(),
            synth: SynthConfig::default(),
            features: FeatureSection::default(),
            svr: SvrParams::default(),
            predictor: PredictorSection::default(),
            attacks: AttackConfig::default(),
            detector: DetectorParams::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

/// Parses TOML (or JSON by extension). Relative paths are taken from the file's directory.
pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut cfg = parse_config(&text, path.extension().is_some_and(|e| e == "json"))
        .map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let Some(n) = cfg.paths.network.as_mut() {
        resolve(n);
    }
    cfg.paths.data.iter_mut().for_each(resolve);
    if let Some(o) = cfg.paths.out_dir.as_mut() {
        resolve(o);
    }
    Ok(cfg)
}

pub fn parse_config(text: &str, json: bool) -> Result<RunConfig, ConfigError> {
    if json {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{s}: {}: {}", self.key, self.message)
    }
}

impl RunConfig {
    /// Every violation found, errors and warnings alike.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut err = |key: &str, message: String| {
            out.push(Diagnostic { severity: Severity::Error, key: key.into(), message });
        };
        if self.seed < 0 {
            err("seed", format!("must be non-negative, got {}", self.seed));
        }
        if let Some(n) = &self.paths.network {
            if !n.is_file() {
                err("paths.network", format!("{} does not exist", n.display()));
            }
        }
        for p in &self.paths.data {
            if !p.is_file() {
                err("paths.data", format!("{} does not exist", p.display()));
            }
        }
        if let Err(e) = self.synth.validate() {
            err("synth", e.to_string());
        }
        if let Err(e) = self.features.config() {
            err("features", e.0);
        }
        if self.paths.data.is_empty() {
            let (a, b) = (self.synth.start.and_hms_opt(0, 0, 0).expect("midnight"), self.synth.end.and_hms_opt(23, 0, 0).expect("valid time"));
            if self.features.split <= a || self.features.split > b {
                err("features.split", format!("{} is outside the synthetic range {a} .. {b}", self.features.split));
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(self.svr.eps.is_finite() && self.svr.eps >= 0.0) {
            err("svr.eps", format!("must be non-negative, got {}", self.svr.eps));
        }
        for (k, v) in [("svr.penalty", self.svr.penalty), ("svr.sigma", self.svr.sigma), ("svr.tol", self.svr.tol)] {
            if !positive(v) {
                err(k, format!("must be positive, got {v}"));
            }
        }
        if self.predictor.max_train_rows == Some(0) {
            err("predictor.max_train_rows", "must be at least 1".into());
        }
        let a = &self.attacks;
        if a.k_min < 2 {
            err("attacks.k_min", format!("must be at least 2, got {}", a.k_min));
        }
        if let Some(k) = a.k_max {
            if k < a.k_min {
                err("attacks.k_max", format!("{k} is below k_min {}", a.k_min));
            }
        }
        if a.random_count > 0 && a.random_tau_grid.is_empty() {
            err("attacks.random_tau_grid", "empty".into());
        }
        for (key, grid) in [("attacks.random_tau_grid", &a.random_tau_grid), ("attacks.designed_tau_grid", &a.designed_tau_grid)] {
            if let Some(t) = grid.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
                err(key, format!("load shift {t} outside (0, 1)"));
            }
        }
        if !(a.critical_frac > 0.0 && a.critical_frac <= 1.0) {
            err("attacks.critical_frac", format!("must be in (0, 1], got {}", a.critical_frac));
        }
        if !positive(self.detector.c) {
            err("detector.c", format!("must be positive, got {}", self.detector.c));
        }
        if !(self.detector.tau_min >= 0.0 && self.detector.tau_min < 1.0) {
            err("detector.tau_min", format!("must be in [0, 1), got {}", self.detector.tau_min));
        }
        let e = &self.evaluation;
        if !(e.train_frac > 0.0 && e.train_frac < 1.0) {
            err("evaluation.train_frac", format!("must be in (0, 1), got {}", e.train_frac));
        }
        for &(c, t) in &e.sweep {
            if !positive(c) || !(0.0..1.0).contains(&t) {
                err("evaluation.sweep", format!("cell ({c}, {t}) needs C > 0 and τ_min in [0, 1)"));
            }
        }
        if e.suite.k_min < 2 {
            err("evaluation.suite.k_min", format!("must be at least 2, got {}", e.suite.k_min));
        }

        let mut warn = |key: &str, message: String| {
            out.push(Diagnostic { severity: Severity::Warning, key: key.into(), message });
        };
        if self.detector.tau_min > 0.2 {
            warn("detector.tau_min", format!("{} exceeds the 20% load-shift regime", self.detector.tau_min));
        }
        for (key, grid) in [("attacks.random_tau_grid", &a.random_tau_grid), ("attacks.designed_tau_grid", &a.designed_tau_grid)] {
            if let Some(t) = grid.iter().find(|&&t| t > 0.2 && t < 1.0) {
                warn(key, format!("load shift {t} exceeds the 20% regime"));
            }
        }
        if let Some(&(_, t)) = e.sweep.iter().find(|&&(_, t)| t > 0.2 && t < 1.0) {
            warn("evaluation.sweep", format!("τ_min {t} exceeds the 20% regime"));
        }
        out
    }

    pub fn seed(&self) -> u64 {
        self.seed.max(0) as u64
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths.out_dir = None;
        hash_json(&serde_json::to_value(&c).expect("config serializes"))
    }
}

/// Hash of a JSON value with sorted keys.
pub fn hash_json(v: &serde_json::Value) -> String {
    let text = serde_json::to_string(v).expect("value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}
