use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attack::AttackKind;

use super::detector::{tau_bucket, Bucket, SweepRow};
use super::mitigation::{MitigationPoint, MitigationRecord};
use super::predictor::Metrics;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    pub loads: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train: Metrics,
    pub test: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub c: f64,
    pub tau_min: f64,
    pub train_normal: usize,
    pub train_attacked: usize,
    pub support_vectors: usize,
    /// Over all normal samples.
    pub false_alarm: f64,
    pub false_alarm_test: f64,
    /// Held-out random attacks, bucketed by realized shift.
    pub random_test: Vec<Bucket>,
    /// Graded random attacks never used in training.
    pub eval_suite: Vec<Bucket>,
}

/// Detection of designed attacks per τ, over all of them and over those with consequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignedRow {
    pub kind: AttackKind,
    pub tau: f64,
    pub n: usize,
    pub detected: usize,
    pub n_consequence: usize,
    pub detected_consequence: usize,
}

impl DesignedRow {
    pub fn probability(&self) -> Option<f64> {
        (self.n > 0).then(|| self.detected as f64 / self.n as f64)
    }

    pub fn probability_consequence(&self) -> Option<f64> {
        (self.n_consequence > 0).then(|| self.detected_consequence as f64 / self.n_consequence as f64)
    }
}

pub fn designed_detection(records: &[MitigationRecord]) -> Vec<DesignedRow> {
    let mut rows: BTreeMap<(AttackKind, usize), DesignedRow> = BTreeMap::new();
    for r in records {
        let b = tau_bucket(r.tau);
        let row = rows.entry((r.kind, b)).or_insert(DesignedRow {
            kind: r.kind,
            tau: b as f64 / 100.0,
            n: 0,
            detected: 0,
            n_consequence: 0,
            detected_consequence: 0,
        });
        row.n += 1;
        row.detected += r.detected as usize;
        if r.has_consequence() {
            row.n_consequence += 1;
            row.detected_consequence += r.detected as usize;
        }
    }
    rows.into_values().collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub normal: usize,
    pub random: usize,
    pub random_discarded: usize,
    pub eval_suite: usize,
    pub eval_suite_failed: usize,
    pub critical_total: usize,
    pub critical_used: usize,
    pub cm: usize,
    pub lo: usize,
    pub designed_discarded: usize,
    /// Designed attacks whose attacked-load dispatch was infeasible.
    pub mitigation_discarded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub seed: u64,
    pub predictor: PredictorReport,
    pub sweep: Vec<SweepRow>,
    pub detector: DetectorReport,
    pub designed: Vec<DesignedRow>,
    pub mitigation: Vec<MitigationPoint>,
    pub counts: Counts,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn table(header: &[String], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn heads(names: &[&str]) -> Vec<String> {
    let mut h = vec!["config_hash".to_string(), "seed".to_string()];
    h.extend(names.iter().map(|s| s.to_string()));
    h
}

impl EvalReport {
    fn row(&self, cells: Vec<String>) -> Vec<String> {
        let mut r = vec![self.config_hash.clone(), self.seed.to_string()];
        r.extend(cells);
        r
    }

    /// Flat tables named after the figures they back: (file name, CSV text).
    pub fn csv_tables(&self) -> Vec<(&'static str, String)> {
        let p = &self.predictor;
        let fig2 = table(
            &heads(&["load", "rmse_train_mw", "mape_train", "rmse_test_mw", "mape_test"]),
            p.loads
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    self.row(vec![
                        l.clone(),
                        p.train.rmse[i].to_string(),
                        p.train.mape[i].to_string(),
                        p.test.rmse[i].to_string(),
                        p.test.mape[i].to_string(),
                    ])
                })
                .collect(),
        );

        let mut names = vec!["c", "tau_min", "train_normal", "train_attacked", "train_error", "false_alarm", "false_alarm_test"];
        let taus: Vec<String> = (1..=20).map(|k| format!("missed_{k}")).collect();
        names.extend(taus.iter().map(|s| s.as_str()));
        names.push("error");
        let fig3 = table(
            &heads(&names),
            self.sweep
                .iter()
                .map(|s| {
                    let mut cells = vec![
                        s.c.to_string(),
                        s.tau_min.to_string(),
                        s.train_normal.to_string(),
                        s.train_attacked.to_string(),
                        s.train_error.to_string(),
                        s.false_alarm.to_string(),
                        s.false_alarm_test.to_string(),
                    ];
                    for k in 0..20 {
                        cells.push(opt(s.buckets.get(k).and_then(|b| b.missed)));
                    }
                    cells.push(s.error.clone().unwrap_or_default());
                    self.row(cells)
                })
                .collect(),
        );

        let d = &self.detector;
        let mut rows = Vec::new();
        for (set, buckets) in [("random_test", &d.random_test), ("eval_suite", &d.eval_suite)] {
            for b in buckets {
                rows.push(self.row(vec![
                    set.to_string(),
                    b.tau.to_string(),
                    b.n.to_string(),
                    b.detected.to_string(),
                    opt(b.probability),
                    opt(b.missed),
                    d.false_alarm.to_string(),
                ]));
            }
        }
        let fig4 = table(&heads(&["set", "tau", "n", "detected", "detection", "missed", "false_alarm"]), rows);

        let fig5 = table(
            &heads(&["kind", "tau", "n", "detection", "n_consequence", "detection_consequence"]),
            self.designed
                .iter()
                .map(|r| {
                    self.row(vec![
                        r.kind.label().to_string(),
                        r.tau.to_string(),
                        r.n.to_string(),
                        opt(r.probability()),
                        r.n_consequence.to_string(),
                        opt(r.probability_consequence()),
                    ])
                })
                .collect(),
        );

        let fig6 = table(
            &heads(&["kind", "tau", "n", "detected", "all_detected", "red", "blue"]),
            self.mitigation
                .iter()
                .map(|m| {
                    self.row(vec![
                        m.kind.label().to_string(),
                        m.tau.to_string(),
                        m.n.to_string(),
                        m.detected.to_string(),
                        m.all_detected().to_string(),
                        m.red.to_string(),
                        m.blue.to_string(),
                    ])
                })
                .collect(),
        );

        vec![
            ("fig2_rmse_mape.csv", fig2),
            ("fig3_sweep.csv", fig3),
            ("fig4_detection.csv", fig4),
            ("fig5_cm_lo.csv", fig5),
            ("fig6_mitigation.csv", fig6),
        ]
    }
}
