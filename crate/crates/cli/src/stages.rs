use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use lrshield::attack::{batch_generate, read_jsonl, write_jsonl, AttackKind, AttackScenario, Discard};
use lrshield::data::{
    chronological_split, ingest_csv, map_zones_to_buses, normalize_calendar, synth_loads, time_features,
    write_wide_csv, FeatureDataset, LoadSeries,
};
use lrshield::dcopf::Dcopf;
use lrshield::grid::{load_network, NetworkFile, NetworkModel};
use lrshield::pipeline::{
    aggregate_mitigation, build_detector_samples, designed_detection, detector_training_set, eval_suite,
    evaluate_detector, hour_dispatch, metrics_rmse_mape, mitigate_at, predict_loads, split_samples,
    sweep_hyperparameters, train_detector, train_predictor, verdicts, Counts, DetectorReport, DetectorSample,
    DetectorSplit, EvalReport, HourRecord, MitigationRecord, PipelineError, PredictorBundle, PredictorReport,
    SweepRow,
};
use lrshield::rng::{domain, stream};
use lrshield::SvmModel;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{hash_json, RunConfig};
use crate::store::{read_json, sha256_file, stage_outputs, Envelope, Manifest};

const IEEE30: &str = include_str!("../../../fixtures/ieee30.json");

pub const ZONE_LOADS: &str = "zone_loads.csv";
pub const LOADS: &str = "loads.csv";
pub const FEATURES: &str = "features";
pub const PREDICTOR: &str = "predictor.json";
pub const HOURS: &str = "hours.json";
pub const PREDICTOR_METRICS: &str = "predictor_metrics.json";
pub const ATTACKS: &str = "attacks.jsonl";
pub const SUITE: &str = "suite.jsonl";
pub const ATTACK_SUMMARY: &str = "attack_summary.json";
pub const DETECTOR: &str = "detector.json";
pub const DETECTOR_SPLIT: &str = "detector_split.json";
pub const SWEEP: &str = "sweep.json";
pub const EVALUATION: &str = "evaluation.json";
pub const MITIGATION: &str = "mitigation.json";
pub const REPORT: &str = "report.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    SynthData,
    Ingest,
    Features,
    TrainPredictor,
    GenAttacks,
    TrainDetector,
    Evaluate,
    Mitigate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::SynthData => "synth-data",
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::TrainPredictor => "train-predictor",
            Stage::GenAttacks => "gen-attacks",
            Stage::TrainDetector => "train-detector",
            Stage::Evaluate => "evaluate",
            Stage::Mitigate => "mitigate",
            Stage::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalSummary {
    pub series_row: usize,
    pub lines: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackSummary {
    pub hours: usize,
    pub random: usize,
    pub cm: usize,
    pub lo: usize,
    pub suite: usize,
    pub suite_failed: usize,
    pub critical_total: usize,
    pub critical: Vec<CriticalSummary>,
    pub infeasible_hours: Vec<usize>,
    pub discards: Vec<Discard>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Evaluation {
    pub detector: DetectorReport,
    /// Verdict per designed scenario, in attack-file order.
    pub designed: Vec<DesignedVerdict>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignedVerdict {
    /// Line of the scenario in the attack file.
    pub scenario: usize,
    pub kind: AttackKind,
    pub tau: f64,
    pub detected: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mitigation {
    pub records: Vec<MitigationRecord>,
    pub discarded: usize,
}

pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub hash: String,
    pub seed: u64,
    pub use_cache: bool,
    manifest: Manifest,
}

fn pipeline(e: PipelineError) -> anyhow::Error {
    anyhow!(e)
}

impl Run {
    pub fn new(cfg: RunConfig, out: PathBuf, use_cache: bool) -> Result<Self> {
        fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
        let hash = cfg.hash();
        let seed = cfg.seed();
        let mut manifest = Manifest::load(&out)?.unwrap_or_default();
        manifest.config_hash = hash.clone();
        manifest.seed = seed;
        Ok(Self { cfg, out, hash, seed, use_cache, manifest })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn envelope<T>(&self, data: T) -> Envelope<T> {
        Envelope { config_hash: self.hash.clone(), seed: self.seed, data }
    }

    fn upstream(&self, stage: Stage) -> String {
        self.manifest.stages.get(stage.name()).map(|e| e.key.clone()).unwrap_or_default()
    }

    fn network(&self) -> Result<NetworkModel> {
        match &self.cfg.paths.network {
            Some(p) => load_network(p).with_context(|| format!("cannot load network {}", p.display())),
            None => {
                let file: NetworkFile = serde_json::from_str(IEEE30).expect("bundled network parses");
                Ok(NetworkModel::from_file(&file)?)
            }
        }
    }

    fn network_key(&self) -> Result<String> {
        Ok(match &self.cfg.paths.network {
            Some(p) => sha256_file(p)?,
            None => "ieee30".into(),
        })
    }

    fn key(&self, stage: Stage) -> Result<String> {
        let c = &self.cfg;
        let v = match stage {
            Stage::SynthData => json!({ "synth": c.synth, "seed": self.seed }),
            Stage::Ingest => {
                let src = if c.paths.data.is_empty() {
                    json!({ "synth": self.upstream(Stage::SynthData) })
                } else {
                    json!({ "files": c.paths.data.iter().map(|p| sha256_file(p)).collect::<Result<Vec<_>>>()? })
                };
                json!({ "source": src, "calendar": c.synth.calendar })
            }
            Stage::Features => json!({ "ingest": self.upstream(Stage::Ingest), "features": c.features.config()? }),
            Stage::TrainPredictor => json!({
                "features": self.upstream(Stage::Features),
                "split": c.features.split,
                "svr": c.svr,
                "predictor": c.predictor,
                "seed": self.seed,
            }),
            Stage::GenAttacks => json!({
                "ingest": self.upstream(Stage::Ingest),
                "features": c.features.config()?,
                "network": self.network_key()?,
                "attacks": c.attacks,
                "suite": c.evaluation.suite,
                "seed": self.seed,
            }),
            Stage::TrainDetector => json!({
                "predictor": self.upstream(Stage::TrainPredictor),
                "attacks": self.upstream(Stage::GenAttacks),
                "detector": c.detector,
                "train_frac": c.evaluation.train_frac,
                "sweep": c.evaluation.sweep,
                "seed": self.seed,
            }),
            Stage::Evaluate => json!({ "detector": self.upstream(Stage::TrainDetector) }),
            Stage::Mitigate => json!({ "evaluate": self.upstream(Stage::Evaluate), "network": self.network_key()? }),
            Stage::Report => json!({
                "predictor": self.upstream(Stage::TrainPredictor),
                "attacks": self.upstream(Stage::GenAttacks),
                "detector": self.upstream(Stage::TrainDetector),
                "evaluate": self.upstream(Stage::Evaluate),
                "mitigate": self.upstream(Stage::Mitigate),
            }),
        };
        Ok(hash_json(&json!({ "stage": stage.name(), "inputs": v })))
    }

    /// Runs one stage unless its cached outputs are still valid.
    pub fn run_stage(&mut self, stage: Stage) -> Result<()> {
        let key = self.key(stage)?;
        if self.use_cache && self.manifest.is_fresh(&self.out, stage.name(), &key) {
            info!("{}: cached", stage.name());
            return Ok(());
        }
        let t = Instant::now();
        info!("{}: running", stage.name());
        let outputs = {
            let this = &*self;
            stage_outputs(&self.out, stage.name(), |dir| match stage {
                Stage::SynthData => this.synth_data(dir),
                Stage::Ingest => this.ingest(dir),
                Stage::Features => this.features(dir),
                Stage::TrainPredictor => this.train_predictor(dir),
                Stage::GenAttacks => this.gen_attacks(dir),
                Stage::TrainDetector => this.train_detector(dir),
                Stage::Evaluate => this.evaluate(dir),
                Stage::Mitigate => this.mitigate(dir),
                Stage::Report => this.report(dir),
            })
            .with_context(|| format!("stage {} failed", stage.name()))?
        };
        info!("{}: done in {:.1} s", stage.name(), t.elapsed().as_secs_f64());
        self.manifest.stages.insert(stage.name().into(), crate::store::StageEntry { key, outputs });
        self.manifest.save(&self.out)
    }

    pub fn run_all(&mut self) -> Result<()> {
        let mut stages = Vec::new();
        if self.cfg.paths.data.is_empty() {
            stages.push(Stage::SynthData);
        }
        stages.extend([
            Stage::Ingest,
            Stage::Features,
            Stage::TrainPredictor,
            Stage::GenAttacks,
            Stage::TrainDetector,
            Stage::Evaluate,
            Stage::Mitigate,
            Stage::Report,
        ]);
        for s in stages {
            self.run_stage(s)?;
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&self, dir: &Path, name: &str, data: T) -> Result<()> {
        let f = fs::File::create(dir.join(name))?;
        let mut w = std::io::BufWriter::new(f);
        serde_json::to_writer(&mut w, &self.envelope(data))?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        let e: Envelope<T> = read_json(&self.path(name))?;
        Ok(e.data)
    }

    fn read_series(&self) -> Result<LoadSeries> {
        let p = self.path(LOADS);
        if !p.exists() {
            bail!("missing input {}; run ingest first", p.display());
        }
        Ok(ingest_csv(&[p])?)
    }

    fn read_scenarios(&self, name: &str) -> Result<Vec<AttackScenario>> {
        let p = self.path(name);
        let f = fs::File::open(&p).with_context(|| format!("missing input {}; run gen-attacks first", p.display()))?;
        Ok(read_jsonl(std::io::BufReader::new(f))?)
    }

    fn synth_data(&self, dir: &Path) -> Result<()> {
        let series = synth_loads(&self.cfg.synth, self.seed)?;
        info!("synthesized {} hours for {} zones", series.len(), series.n_cols());
        write_wide_csv(&series, &dir.join(ZONE_LOADS))?;
        Ok(())
    }

    fn ingest(&self, dir: &Path) -> Result<()> {
        let files = if self.cfg.paths.data.is_empty() {
            let p = self.path(ZONE_LOADS);
            if !p.exists() {
                bail!("missing input {}; run synth-data first or set paths.data", p.display());
            }
            vec![p]
        } else {
            self.cfg.paths.data.clone()
        };
        let raw = ingest_csv(&files)?;
        let series = map_zones_to_buses(&normalize_calendar(&raw, self.cfg.synth.calendar)?)?;
        series.check_hourly(self.cfg.synth.calendar)?;
        info!("{} hourly rows after calendar repair", series.len());
        write_wide_csv(&series, &dir.join(LOADS))?;
        Ok(())
    }

    fn features(&self, dir: &Path) -> Result<()> {
        let series = self.read_series()?;
        let ds = FeatureDataset::build(&series, self.cfg.features.config()?)?;
        info!("feature matrix {} x {} (p = {})", ds.m(), ds.x.cols(), ds.p());
        let sub = dir.join(FEATURES);
        fs::create_dir_all(&sub)?;
        ds.write_cache(&sub)?;
        Ok(())
    }

    fn train_predictor(&self, dir: &Path) -> Result<()> {
        let raw = FeatureDataset::read_cache(&self.path(FEATURES))
            .with_context(|| "missing feature cache; run features first")?;
        let split = chronological_split(&raw, self.cfg.features.split)?;
        let mut rows = split.train.clone();
        if let Some(cap) = self.cfg.predictor.max_train_rows {
            if rows.len() > cap {
                let mut rng = stream(self.seed, domain::SUBSAMPLE, 0);
                let mut keep: Vec<usize> = sample(&mut rng, rows.len(), cap).into_iter().map(|i| rows[i]).collect();
                keep.sort_unstable();
                rows = keep;
            }
        }
        let ds = raw.standardize(&split.train)?;
        info!("training {} regressors on {} rows", ds.n_loads(), rows.len());
        let mut bundle = train_predictor(&ds, &rows, &self.cfg.svr).map_err(pipeline)?;
        bundle.config_hash = Some(self.hash.clone());

        let all: Vec<usize> = (0..ds.m()).collect();
        let yhat = predict_loads(&bundle, &ds, &all).map_err(pipeline)?;
        let cols: Vec<usize> = (0..ds.n_loads()).collect();
        let pick = |m: &lrshield::Matrix, r: &[usize]| m.select(r, &cols);
        let train = metrics_rmse_mape(&pick(&raw.y, &rows), &pick(&yhat, &rows)).map_err(pipeline)?;
        let test = metrics_rmse_mape(&pick(&raw.y, &split.test), &pick(&yhat, &split.test)).map_err(pipeline)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        info!("mean MAPE train {:.3}%, test {:.3}%", 100.0 * mean(&train.mape), 100.0 * mean(&test.mape));
        let report = PredictorReport {
            loads: ds.loads.clone(),
            train_rows: rows.len(),
            test_rows: split.test.len(),
            train,
            test,
        };
        let hours: Vec<HourRecord> = all
            .iter()
            .map(|&r| HourRecord {
                series_row: raw.series_rows[r] + 1,
                time: time_features(raw.timestamps[r]),
                predicted: yhat.row(r).to_vec(),
                observed: raw.y.row(r).to_vec(),
            })
            .collect();
        self.write_json(dir, PREDICTOR, &bundle)?;
        self.write_json(dir, HOURS, &hours)?;
        self.write_json(dir, PREDICTOR_METRICS, &report)?;
        Ok(())
    }

    fn gen_attacks(&self, dir: &Path) -> Result<()> {
        let series = self.read_series()?;
        let warmup = self.cfg.features.config()?.warmup();
        if series.len() < warmup + 2 {
            bail!("series of {} hours is shorter than the feature warm-up", series.len());
        }
        let rows: Vec<usize> = (warmup + 1..series.len()).collect();
        let obs: Vec<Vec<f64>> = rows.iter().map(|&r| series.row(r).to_vec()).collect();
        let net = self.network()?;
        if net.n_loads() != series.n_cols() {
            bail!("network has {} loads, data has {}", net.n_loads(), series.n_cols());
        }
        let mut batch = batch_generate(&net, &obs, &self.cfg.attacks, self.seed)?;
        for s in &mut batch.scenarios {
            s.hour = rows[s.hour];
            s.config_hash = Some(self.hash.clone());
        }
        for d in &mut batch.discards {
            d.hour = rows[d.hour];
        }
        let (mut suite, suite_failed) = eval_suite(&obs, &rows, &self.cfg.evaluation.suite, self.seed);
        for s in &mut suite {
            s.config_hash = Some(self.hash.clone());
        }
        let count = |k: AttackKind| batch.scenarios.iter().filter(|s| s.kind == k).count();
        let summary = AttackSummary {
            hours: rows.len(),
            random: count(AttackKind::Random),
            cm: count(AttackKind::Cm),
            lo: count(AttackKind::Lo),
            suite: suite.len(),
            suite_failed,
            critical_total: batch.critical_total,
            critical: batch.critical.iter().map(|c| CriticalSummary { series_row: rows[c.hour], lines: c.lines.clone() }).collect(),
            infeasible_hours: batch.infeasible_hours.iter().map(|&h| rows[h]).collect(),
            discards: batch.discards,
        };
        info!(
            "{} random, {} CM, {} LO attacks ({} discarded); {} graded evaluation attacks",
            summary.random,
            summary.cm,
            summary.lo,
            summary.discards.len(),
            summary.suite
        );
        let w = |name: &str, s: &[AttackScenario]| -> Result<()> {
            let f = std::io::BufWriter::new(fs::File::create(dir.join(name))?);
            write_jsonl(f, s)?;
            Ok(())
        };
        w(ATTACKS, &batch.scenarios)?;
        w(SUITE, &suite)?;
        self.write_json(dir, ATTACK_SUMMARY, &summary)?;
        Ok(())
    }

    fn random_samples(&self) -> Result<(Vec<HourRecord>, Vec<AttackScenario>, Vec<DetectorSample>)> {
        let hours: Vec<HourRecord> = self.read_json(HOURS)?;
        let scenarios = self.read_scenarios(ATTACKS)?;
        let random: Vec<AttackScenario> = scenarios.iter().filter(|s| s.kind == AttackKind::Random).cloned().collect();
        let samples = build_detector_samples(&hours, &random).map_err(pipeline)?;
        Ok((hours, scenarios, samples))
    }

    fn train_detector(&self, dir: &Path) -> Result<()> {
        let (_, _, samples) = self.random_samples()?;
        let split = split_samples(&samples, self.cfg.evaluation.train_frac, self.seed).map_err(pipeline)?;
        let sweep = sweep_hyperparameters(&samples, &split, &self.cfg.evaluation.sweep, &self.cfg.detector, self.seed);
        for r in &sweep {
            info!(
                "sweep C = {}, τ_min = {}: false alarm {:.4}, {} support vectors",
                r.c, r.tau_min, r.false_alarm, r.support_vectors
            );
        }
        let params = &self.cfg.detector;
        let train = detector_training_set(&samples, &split, params, self.seed);
        let mut model = train_detector(&samples, &train, params).map_err(pipeline)?;
        model.config_hash = Some(self.hash.clone());
        info!("detector: {} training samples, {} support vectors", train.len(), model.beta.len());
        self.write_json(dir, DETECTOR, &model)?;
        self.write_json(dir, DETECTOR_SPLIT, &split)?;
        self.write_json(dir, SWEEP, &sweep)?;
        Ok(())
    }

    fn evaluate(&self, dir: &Path) -> Result<()> {
        let (hours, scenarios, samples) = self.random_samples()?;
        let model: SvmModel = self.read_json(DETECTOR)?;
        let split: DetectorSplit = self.read_json(DETECTOR_SPLIT)?;
        let params = &self.cfg.detector;
        let train = detector_training_set(&samples, &split, params, self.seed);
        let train_attacked = train.iter().filter(|&&i| samples[i].is_attacked()).count();

        let random = evaluate_detector(&model, &samples, &split.normal_all(), &split.attacked_test).map_err(pipeline)?;
        let test = evaluate_detector(&model, &samples, &split.normal_test, &[]).map_err(pipeline)?;

        let suite = self.read_scenarios(SUITE)?;
        let suite_samples = build_detector_samples(&hours, &suite).map_err(pipeline)?;
        let suite_idx: Vec<usize> = (hours.len()..suite_samples.len()).collect();
        let graded = evaluate_detector(&model, &suite_samples, &[], &suite_idx).map_err(pipeline)?;

        let designed_idx: Vec<usize> = (0..scenarios.len()).filter(|&i| scenarios[i].kind != AttackKind::Random).collect();
        let designed: Vec<AttackScenario> = designed_idx.iter().map(|&i| scenarios[i].clone()).collect();
        let designed_samples = build_detector_samples(&hours, &designed).map_err(pipeline)?;
        let idx: Vec<usize> = (hours.len()..designed_samples.len()).collect();
        let labels = verdicts(&model, &designed_samples, &idx).map_err(pipeline)?;
        let designed: Vec<DesignedVerdict> = designed_idx
            .iter()
            .zip(labels)
            .map(|(&i, l)| DesignedVerdict {
                scenario: i,
                kind: scenarios[i].kind,
                tau: scenarios[i].tau_requested,
                detected: l > 0,
            })
            .collect();
        info!("false alarm {:.4} (test {:.4})", random.false_alarm, test.false_alarm);

        let report = DetectorReport {
            c: params.c,
            tau_min: params.tau_min,
            train_normal: train.len() - train_attacked,
            train_attacked,
            support_vectors: model.beta.len(),
            false_alarm: random.false_alarm,
            false_alarm_test: test.false_alarm,
            random_test: random.buckets,
            eval_suite: graded.buckets,
        };
        self.write_json(dir, EVALUATION, Evaluation { detector: report, designed })?;
        Ok(())
    }

    fn mitigate(&self, dir: &Path) -> Result<()> {
        let hours: Vec<HourRecord> = self.read_json(HOURS)?;
        let scenarios = self.read_scenarios(ATTACKS)?;
        let eval: Evaluation = self.read_json(EVALUATION)?;
        let net = self.network()?;
        let ctx = Dcopf::new(&net);
        let by_row: BTreeMap<usize, &HourRecord> = hours.iter().map(|h| (h.series_row, h)).collect();
        let mut per_hour: BTreeMap<usize, Vec<&DesignedVerdict>> = BTreeMap::new();
        for v in &eval.designed {
            per_hour.entry(scenarios[v.scenario].hour).or_default().push(v);
        }
        let groups: Vec<(usize, Vec<&DesignedVerdict>)> = per_hour.into_iter().collect();
        let results: Vec<Vec<Option<MitigationRecord>>> = groups
            .par_iter()
            .map(|(row, vs)| {
                let Some(h) = by_row.get(row) else {
                    warn!("series row {row} has no prediction; its attacks are skipped");
                    return vec![None; vs.len()];
                };
                let hd = match hour_dispatch(&ctx, &h.observed, &h.predicted) {
                    Ok(hd) => hd,
                    Err(e) => {
                        warn!("series row {row}: {e}");
                        return vec![None; vs.len()];
                    }
                };
                vs.iter()
                    .map(|v| match mitigate_at(&ctx, &hd, &scenarios[v.scenario], &h.observed, v.detected) {
                        Ok(r) => Some(r),
                        Err(e) => {
                            warn!("scenario {}: {e}", v.scenario);
                            None
                        }
                    })
                    .collect()
            })
            .collect();
        let all: Vec<Option<MitigationRecord>> = results.into_iter().flatten().collect();
        let discarded = all.iter().filter(|r| r.is_none()).count();
        let records: Vec<MitigationRecord> = all.into_iter().flatten().collect();
        info!("{} mitigation records, {} discarded", records.len(), discarded);
        self.write_json(dir, MITIGATION, Mitigation { records, discarded })?;
        Ok(())
    }

    pub fn assemble_report(&self) -> Result<EvalReport> {
        let predictor: PredictorReport = self.read_json(PREDICTOR_METRICS)?;
        let sweep: Vec<SweepRow> = self.read_json(SWEEP)?;
        let eval: Evaluation = self.read_json(EVALUATION)?;
        let mitigation: Mitigation = self.read_json(MITIGATION)?;
        let summary: AttackSummary = self.read_json(ATTACK_SUMMARY)?;
        let designed_discarded = summary.discards.iter().filter(|d| d.kind != AttackKind::Random).count();
        let counts = Counts {
            normal: summary.hours,
            random: summary.random,
            random_discarded: summary.discards.len() - designed_discarded,
            eval_suite: summary.suite,
            eval_suite_failed: summary.suite_failed,
            critical_total: summary.critical_total,
            critical_used: summary.critical.len(),
            cm: summary.cm,
            lo: summary.lo,
            designed_discarded,
            mitigation_discarded: mitigation.discarded,
        };
        Ok(EvalReport {
            config_hash: self.hash.clone(),
            seed: self.seed,
            predictor,
            sweep,
            detector: eval.detector,
            designed: designed_detection(&mitigation.records),
            mitigation: aggregate_mitigation(&mitigation.records),
            counts,
        })
    }

    fn report(&self, dir: &Path) -> Result<()> {
        let report = self.assemble_report()?;
        let f = std::io::BufWriter::new(fs::File::create(dir.join(REPORT))?);
        serde_json::to_writer_pretty(f, &report)?;
        for (name, text) in report.csv_tables() {
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

/// Bundle archive stored by `train-predictor`.
pub fn load_bundle(out: &Path) -> Result<PredictorBundle> {
    let e: Envelope<PredictorBundle> = read_json(&out.join(PREDICTOR))?;
    Ok(e.data)
}
