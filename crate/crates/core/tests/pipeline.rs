mod common;

use chrono::NaiveDate;
use common::fixture;
use common::qp::{gram, rbf, svr_oracle};
use lrshield::attack::{random_lr_attack, AttackKind, AttackScenario};
use lrshield::data::{
    chronological_split, synth_loads, Calendar, FeatureConfig, FeatureDataset, LoadSeries, SynthConfig,
};
use lrshield::grid::load_network;
use lrshield::linalg::Matrix;
use lrshield::pipeline::{
    aggregate_mitigation, build_detector_samples, designed_detection, detector_training_set, eval_suite,
    metrics_rmse_mape, mitigate, predict_loads, split_samples, summarize, sweep_hyperparameters, tau_bucket,
    train_detector, train_predictor, Counts, DetectorParams, DetectorReport, EvalReport, HourRecord,
    MitigationRecord, PredictorReport, SuiteConfig, SvrParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

#[test]
fn metric_examples() {
    let y = Matrix::from_rows(&[vec![100.0]]);
    let m = metrics_rmse_mape(&y, &Matrix::from_rows(&[vec![101.0]])).unwrap();
    assert!((m.rmse[0] - 1.0).abs() < 1e-12 && (m.mape[0] - 0.01).abs() < 1e-12);

    let y = Matrix::from_rows(&[vec![100.0], vec![200.0]]);
    let m = metrics_rmse_mape(&y, &Matrix::from_rows(&[vec![110.0], vec![180.0]])).unwrap();
    assert!((m.rmse[0] - 250f64.sqrt()).abs() < 1e-12);
    assert!((m.mape[0] - 0.10).abs() < 1e-12);

    let same = metrics_rmse_mape(&y, &y).unwrap();
    assert_eq!((same.rmse[0], same.mape[0]), (0.0, 0.0));

    let z = Matrix::from_rows(&[vec![0.0], vec![50.0]]);
    let m = metrics_rmse_mape(&z, &Matrix::from_rows(&[vec![1.0], vec![55.0]])).unwrap();
    assert_eq!(m.mape_excluded, vec![1]);
    assert!((m.mape[0] - 0.1).abs() < 1e-12);
    assert!(metrics_rmse_mape(&z, &y.select(&[0], &[0])).is_err());
}

fn hours(n: usize, n_l: usize, rng: &mut ChaCha8Rng) -> Vec<HourRecord> {
    (0..n)
        .map(|h| {
            let observed: Vec<f64> = (0..n_l).map(|_| rng.random_range(50.0..150.0)).collect();
            HourRecord {
                series_row: 1000 + h,
                time: [1.0 + (h % 12) as f64, (h % 7) as f64, (h % 24) as f64],
                predicted: observed.iter().map(|p| p * rng.random_range(0.97..1.03)).collect(),
                observed,
            }
        })
        .collect()
}

fn random_scenarios(hs: &[HourRecord], n: usize, rng: &mut ChaCha8Rng) -> Vec<AttackScenario> {
    (0..n)
        .map(|k| {
            let h = &hs[rng.random_range(0..hs.len())];
            let tau = (1 + k % 20) as f64 / 100.0;
            loop {
                let kk = rng.random_range(2..=h.observed.len());
                if let Ok((mut s, _)) = random_lr_attack(&h.observed, kk, tau, rng, 200) {
                    s.hour = h.series_row;
                    return s;
                }
            }
        })
        .collect()
}

#[test]
fn detector_samples_have_the_documented_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hs = hours(100, 20, &mut rng);
    let scenarios = random_scenarios(&hs, 50, &mut rng);
    let samples = build_detector_samples(&hs, &scenarios).unwrap();
    assert_eq!(samples.len(), 150);
    assert!(samples.iter().all(|s| s.u.len() == 43));
    assert_eq!(samples.iter().filter(|s| s.v == -1).count(), 100);

    for s in samples.iter().filter(|s| s.is_attacked()) {
        let normal = samples.iter().find(|n| !n.is_attacked() && n.series_row == s.series_row).unwrap();
        assert_eq!(s.u[..23], normal.u[..23]);
        let total = |u: &[f64]| u[23..].iter().sum::<f64>();
        assert!((total(&s.u) - total(&normal.u)).abs() <= 1e-6 * total(&normal.u));
    }

    let h = &hs[4];
    let zero = AttackScenario::new(h.series_row, AttackKind::Random, &h.observed, vec![0.0; 20], 0.05).unwrap();
    let pair = build_detector_samples(&hs[4..5], &[zero]).unwrap();
    assert_eq!(pair[0].u, pair[1].u);
    assert_eq!((pair[0].v, pair[1].v), (-1, 1));

    let mut stray = scenarios[0].clone();
    stray.hour = 5;
    assert!(build_detector_samples(&hs, &[stray]).is_err());
}

#[test]
fn bucket_edges() {
    assert_eq!(tau_bucket(0.0), 1);
    assert_eq!(tau_bucket(0.01), 1);
    assert_eq!(tau_bucket(0.0100001), 2);
    assert_eq!(tau_bucket(0.03), 3);
    assert_eq!(tau_bucket(0.2), 20);
    assert_eq!(tau_bucket(0.35), 20);
}

#[test]
fn constant_detectors_summarize_to_extremes() {
    let attacked: Vec<(usize, i8)> = (1..=20).flat_map(|b| [(b, 1), (b, 1)]).collect();
    let all = summarize(&[1; 30], &attacked);
    assert_eq!(all.false_alarm, 1.0);
    assert!(all.buckets.iter().all(|b| b.probability == Some(1.0) && b.missed == Some(0.0)));

    let attacked: Vec<(usize, i8)> = attacked.into_iter().filter(|&(b, _)| b != 7).map(|(b, _)| (b, -1)).collect();
    let none = summarize(&[-1; 30], &attacked);
    assert_eq!((none.false_alarm, none.specificity), (0.0, 1.0));
    assert_eq!(none.buckets[6].probability, None);
    assert_eq!(none.buckets[6].n, 0);
    assert!(none.buckets.iter().filter(|b| b.n > 0).all(|b| b.probability == Some(0.0)));
}

#[test]
fn split_is_stratified_and_filter_respects_tau_min() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hs = hours(200, 6, &mut rng);
    let scenarios = random_scenarios(&hs, 400, &mut rng);
    let samples = build_detector_samples(&hs, &scenarios).unwrap();
    let split = split_samples(&samples, 0.8, 11).unwrap();
    assert_eq!(split.normal_train.len(), 160);
    assert_eq!(split.normal_all().len(), 200);
    for b in 1..=20 {
        let n = samples.iter().filter(|s| s.bucket() == Some(b)).count();
        let tr = split.attacked_train.iter().filter(|&&i| samples[i].bucket() == Some(b)).count();
        let te = split.attacked_test.iter().filter(|&&i| samples[i].bucket() == Some(b)).count();
        assert_eq!(tr + te, n);
        if n >= 2 {
            assert!(tr > 0 && te > 0, "bucket {b}: {tr}/{te}");
        }
    }
    assert_eq!(split, split_samples(&samples, 0.8, 11).unwrap());

    let params = DetectorParams { tau_min: 0.03, max_normal_train: Some(50), ..DetectorParams::default() };
    let train = detector_training_set(&samples, &split, &params, 11);
    assert_eq!(train.iter().filter(|&&i| !samples[i].is_attacked()).count(), 50);
    assert!(train.iter().filter(|&&i| samples[i].is_attacked()).all(|&i| samples[i].tau_real.unwrap() >= 0.03));
    assert!(train.iter().all(|i| !split.attacked_test.contains(i) && !split.normal_test.contains(i)));

    let none = DetectorParams { tau_min: 0.5, ..DetectorParams::default() };
    let train = detector_training_set(&samples, &split, &none, 11);
    assert!(train_detector(&samples, &train, &none).is_err());
}

#[test]
fn detector_training_is_deterministic_and_sweeps_one_row_per_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let hs = hours(150, 4, &mut rng);
    let scenarios = random_scenarios(&hs, 150, &mut rng);
    let samples = build_detector_samples(&hs, &scenarios).unwrap();
    let split = split_samples(&samples, 0.8, 2).unwrap();
    let params = DetectorParams::default();
    let train = detector_training_set(&samples, &split, &params, 2);
    let a = train_detector(&samples, &train, &params).unwrap();
    let b = train_detector(&samples, &train, &params).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.scaling.is_some());
    assert_eq!(a.dim(), 11);

    let grid = [(1.0, 0.01), (1.0, 0.03), (100.0, 0.01), (100.0, 0.03)];
    let rows = sweep_hyperparameters(&samples, &split, &grid, &params, 2);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r.error.is_none());
        assert!((0.0..=1.0).contains(&r.false_alarm));
        assert!(r.buckets.iter().all(|b| b.probability.is_none_or(|p| (0.0..=1.0).contains(&p))));
    }
}

#[test]
fn larger_penalty_does_not_raise_training_error() {
    // two overlapping clouds of samples, so small C leaves training errors
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let hs = hours(120, 3, &mut rng);
    let mut scenarios = Vec::new();
    for h in &hs {
        let d = rng.random_range(0.0..0.08) * h.observed[0];
        let s = AttackScenario::new(h.series_row, AttackKind::Random, &h.observed, vec![d, -d / 2.0, -d / 2.0], 0.2).unwrap();
        scenarios.push(s);
    }
    let samples = build_detector_samples(&hs, &scenarios).unwrap();
    let split = split_samples(&samples, 0.8, 4).unwrap();
    let grid: Vec<(f64, f64)> = [0.1, 1.0, 10.0, 100.0, 1000.0].iter().map(|&c| (c, 0.0)).collect();
    let rows = sweep_hyperparameters(&samples, &split, &grid, &DetectorParams { tol: 1e-4, ..DetectorParams::default() }, 4);
    for w in rows.windows(2) {
        assert!(w[1].train_error <= w[0].train_error + 1e-12, "{} -> {}", w[0].train_error, w[1].train_error);
    }
    assert!(rows[0].train_error > rows[4].train_error);
}

#[test]
fn graded_suite_fills_every_bucket_with_its_own_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let loads: Vec<Vec<f64>> = (0..10).map(|_| (0..20).map(|_| rng.random_range(50.0..500.0)).collect()).collect();
    let rows: Vec<usize> = (100..110).collect();
    let cfg = SuiteConfig { per_bucket: 5, ..SuiteConfig::default() };
    let (suite, failed) = eval_suite(&loads, &rows, &cfg, 9);
    assert_eq!(failed, 0);
    assert_eq!(suite.len(), 100);
    for s in &suite {
        let p = &loads[s.hour - 100];
        s.check(p).unwrap();
        assert!(s.tau_real > s.tau_requested - 0.01 + 1e-12);
        assert_eq!(tau_bucket(s.tau_real), tau_bucket(s.tau_requested));
    }
    assert_eq!(eval_suite(&loads, &rows, &cfg, 9).0, suite);
}

fn three_bus_attack(p: &[f64], d: f64, tau: f64) -> AttackScenario {
    let mut s = AttackScenario::new(7, AttackKind::Cm, p, vec![-d, d], tau).unwrap();
    s.target_line = Some(1);
    s
}

#[test]
fn forced_verdicts_pick_the_hand_derived_branch() {
    let net = load_network(fixture("three_bus.json")).unwrap();
    let p = [60.0, 90.0];
    let p_svr = [62.0, 88.0];
    // base: line 1-3 binds, g = (90, 60), cost 2700
    // attacked loads (51, 99): g = (81, 69), cost 2880
    // predicted loads (62, 88): g = (92, 58), cost 2660
    let s = three_bus_attack(&p, 9.0, 0.15);
    let caught = mitigate(&net, &s, &p, &p_svr, true).unwrap();
    let missed = mitigate(&net, &s, &p, &p_svr, false).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-6;
    let close_all = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| close(*x, *y));

    assert!(close(caught.base_cost, 2700.0));
    assert!(close(caught.cost_increase_atk, 180.0));
    assert!(close(caught.cost_increase_svr, -40.0));
    assert!(close_all(&caught.flows_normal, &[30.0, 60.0, 30.0]));
    assert!(close_all(&caught.flows_atk, &[24.0, 57.0, 33.0]));
    assert!(close_all(&caught.flows_svr, &[94.0 / 3.0, 182.0 / 3.0, 88.0 / 3.0]));

    assert_eq!(caught.cost_with_framework(), caught.cost_increase_svr);
    assert_eq!(caught.flows_with_framework(), &caught.flows_svr[..]);
    assert_eq!(caught.consequence_with_framework(), caught.consequence_svr());
    assert!(close(caught.consequence_atk(), 100.0 * 180.0 / 2700.0));
    assert!(caught.has_consequence());

    assert_eq!(missed.cost_with_framework(), missed.cost_increase_atk);
    assert_eq!(missed.flows_with_framework(), &missed.flows_atk[..]);
    assert_eq!(missed.consequence_with_framework(), missed.consequence_atk());
    assert_eq!(missed.consequence_atk(), caught.consequence_atk());

    let mut lo = s.clone();
    lo.kind = AttackKind::Lo;
    let lo = mitigate(&net, &lo, &p, &p_svr, true).unwrap();
    assert!(close(lo.consequence_atk(), 95.0));
    assert!(close(lo.consequence_with_framework(), 100.0 * 182.0 / 180.0));
    assert!(!lo.has_consequence());
}

#[test]
fn perfect_prediction_restores_the_baseline() {
    let net = load_network(fixture("three_bus.json")).unwrap();
    let p = [60.0, 90.0];
    let zero = three_bus_attack(&p, 0.0, 0.1);
    let r = mitigate(&net, &zero, &p, &p, false).unwrap();
    assert_eq!((r.cost_increase_atk, r.cost_increase_svr), (0.0, 0.0));

    let s = three_bus_attack(&p, 9.0, 0.15);
    let r = mitigate(&net, &s, &p, &p, true).unwrap();
    assert_eq!(r.cost_with_framework(), 0.0);
    assert_eq!(r.flows_with_framework(), &r.flows_normal[..]);
}

fn record(kind: AttackKind, tau: f64, detected: bool, atk: f64, svr: f64) -> MitigationRecord {
    MitigationRecord {
        kind,
        hour: 0,
        tau,
        target_line: Some(0),
        detected,
        base_cost: 1000.0,
        cost_increase_atk: atk * 10.0,
        cost_increase_svr: svr * 10.0,
        flows_normal: vec![50.0],
        flows_atk: vec![atk],
        flows_svr: vec![svr],
        ratings: vec![100.0],
    }
}

#[test]
fn aggregation_takes_the_worst_case_per_bucket() {
    let records = vec![
        record(AttackKind::Cm, 0.05, true, 30.0, 1.0),
        record(AttackKind::Cm, 0.05, true, 20.0, 4.0),
        record(AttackKind::Cm, 0.10, true, 40.0, 2.0),
        record(AttackKind::Cm, 0.10, false, 25.0, 3.0),
        record(AttackKind::Lo, 0.05, true, 120.0, 90.0),
        record(AttackKind::Lo, 0.05, false, 80.0, 70.0),
    ];
    let pts = aggregate_mitigation(&records);
    assert_eq!(pts.len(), 3);
    let get = |k: AttackKind, t: f64| pts.iter().find(|p| p.kind == k && (p.tau - t).abs() < 1e-12).unwrap();

    let a = get(AttackKind::Cm, 0.05);
    assert!((a.red - 30.0).abs() < 1e-12 && (a.blue - 4.0).abs() < 1e-12);
    assert!(a.all_detected() && a.blue <= a.red);

    let b = get(AttackKind::Cm, 0.10);
    assert!((b.red - 40.0).abs() < 1e-12 && (b.blue - 25.0).abs() < 1e-12);
    assert!(!b.all_detected());

    let c = get(AttackKind::Lo, 0.05);
    assert!((c.red - 120.0).abs() < 1e-12 && (c.blue - 90.0).abs() < 1e-12);
    assert_eq!((c.n, c.detected), (2, 1));

    let single = aggregate_mitigation(&records[2..3]);
    assert_eq!((single[0].red, single[0].blue), (records[2].consequence_atk(), records[2].consequence_with_framework()));

    let designed = designed_detection(&records);
    let lo = designed.iter().find(|r| r.kind == AttackKind::Lo).unwrap();
    assert_eq!((lo.n, lo.detected, lo.n_consequence, lo.detected_consequence), (2, 1, 1, 1));
}

fn tiny_series(n: usize, n_l: usize, seed: u64) -> LoadSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts = Calendar::Fixed.hours(date(2016, 3, 1), date(2016, 3, 5))[..n].to_vec();
    let mut v = Matrix::zeros(n, n_l);
    for k in 0..n {
        for i in 0..n_l {
            v[(k, i)] = 100.0 * (1.0 + i as f64) + 20.0 * ((k as f64) / 3.0 + i as f64).sin() + rng.random_range(-2.0..2.0);
        }
    }
    LoadSeries::new(ts, (0..n_l).map(|i| format!("L{i}")).collect(), v).unwrap()
}

#[test]
fn bundle_matches_per_load_oracles() {
    let series = tiny_series(50, 2, 12);
    for variant in [1u8, 2] {
        let cfg = FeatureConfig { variant, s: 2, d: 1 };
        let ds = FeatureDataset::build(&series, cfg).unwrap();
        let train: Vec<usize> = (0..20).collect();
        let ds = ds.standardize(&train).unwrap();
        let params = SvrParams { eps: 0.05, penalty: 5.0, sigma: 0.1, tol: 1e-8, ..SvrParams::default() };
        let bundle = train_predictor(&ds, &train, &params).unwrap();
        assert_eq!(bundle.n_loads(), 2);
        let all: Vec<usize> = (0..ds.m()).collect();
        let x_all = ds.x.select(&all, &(0..ds.x.cols()).collect::<Vec<_>>());
        let pred = bundle.predict_scaled(&x_all).unwrap();
        for i in 0..2 {
            let cols = ds.design_columns(i);
            assert_eq!(bundle.model(i).dim(), cols.len());
            let xt: Vec<Vec<f64>> = train.iter().map(|&r| cols.iter().map(|&c| ds.x[(r, c)]).collect()).collect();
            let y: Vec<f64> = train.iter().map(|&r| ds.y[(r, i)]).collect();
            let (coef, b, _) = svr_oracle(&gram(0.1, &xt), &y, 0.05, 5.0);
            for r in 0..ds.m() {
                let q: Vec<f64> = cols.iter().map(|&c| ds.x[(r, c)]).collect();
                let f = b + xt.iter().zip(&coef).map(|(s, c)| c * rbf(0.1, s, &q)).sum::<f64>();
                assert!((pred[(r, i)] - f).abs() < 1e-4, "variant {variant} load {i} row {r}: {} vs {f}", pred[(r, i)]);
            }
        }
    }
}

#[test]
fn variant_one_models_see_eleven_inputs() {
    let series = tiny_series(60, 3, 2);
    let ds = FeatureDataset::build(&series, FeatureConfig::variant(1).unwrap()).unwrap();
    let train: Vec<usize> = (0..8).collect();
    let ds = ds.standardize(&train).unwrap();
    let bundle = train_predictor(&ds, &train, &SvrParams::default()).unwrap();
    assert!((0..3).all(|i| bundle.model(i).dim() == 11));
}

#[test]
fn noiseless_loads_are_predicted_within_one_percent() {
    let cfg = SynthConfig { start: date(2017, 1, 1), end: date(2017, 3, 5), noise_sd: 0.0, ..SynthConfig::default() };
    let raw = synth_loads(&cfg, 1).unwrap();
    let series = lrshield::data::map_zones_to_buses(&lrshield::data::normalize_calendar(&raw, Calendar::UsEastern).unwrap()).unwrap();
    let raw = FeatureDataset::build(&series, FeatureConfig::variant(2).unwrap()).unwrap();
    let split = chronological_split(&raw, date(2017, 2, 20).and_hms_opt(0, 0, 0).unwrap()).unwrap();
    let ds = raw.standardize(&split.train).unwrap();
    let bundle = train_predictor(&ds, &split.train, &SvrParams::default()).unwrap();
    let yhat = predict_loads(&bundle, &ds, &split.test).unwrap();
    let y = raw.y.select(&split.test, &(0..20).collect::<Vec<_>>());
    let m = metrics_rmse_mape(&y, &yhat).unwrap();
    for (i, mape) in m.mape.iter().enumerate() {
        assert!(*mape <= 0.01, "load {i}: MAPE {mape}");
    }

    let retrained = train_predictor(&ds, &split.train, &SvrParams::default()).unwrap();
    assert_eq!(serde_json::to_string(&bundle).unwrap(), serde_json::to_string(&retrained).unwrap());
    assert!(predict_loads(&bundle, &raw, &split.test).is_err());
}

#[test]
fn report_tables_carry_hash_and_seed() {
    let records = vec![record(AttackKind::Cm, 0.05, true, 30.0, 1.0)];
    let metrics = metrics_rmse_mape(&Matrix::from_rows(&[vec![1.0]]), &Matrix::from_rows(&[vec![1.0]])).unwrap();
    let eval = summarize(&[-1, 1], &[(3, 1)]);
    let report = EvalReport {
        config_hash: "abc123".into(),
        seed: 42,
        predictor: PredictorReport { loads: vec!["L0".into()], train_rows: 1, test_rows: 1, train: metrics.clone(), test: metrics },
        sweep: Vec::new(),
        detector: DetectorReport {
            c: 2000.0,
            tau_min: 0.03,
            train_normal: 1,
            train_attacked: 1,
            support_vectors: 2,
            false_alarm: eval.false_alarm,
            false_alarm_test: eval.false_alarm,
            random_test: eval.buckets.clone(),
            eval_suite: eval.buckets,
        },
        designed: designed_detection(&records),
        mitigation: aggregate_mitigation(&records),
        counts: Counts::default(),
    };
    let tables = report.csv_tables();
    assert_eq!(tables.len(), 5);
    for (name, text) in tables {
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("config_hash,seed,"), "{name}");
        for l in lines {
            assert!(l.starts_with("abc123,42,"), "{name}: {l}");
        }
    }
}
