use std::path::PathBuf;

use lrshield::grid::matpower::read_matpower;
use lrshield::grid::{line_flows, load_network, ptdf_matrix, susceptance_matrix, GridError, NetworkModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn count_table_rows(text: &str, table: &str) -> usize {
    let start = text.find(&format!("mpc.{table} = [")).unwrap();
    let body = &text[start..];
    let end = body.find("];").unwrap();
    body[..end].lines().skip(1).filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('%')).count()
}

#[test]
fn ieee30_has_twenty_loads() {
    let net = load_network(fixture("ieee30.json")).unwrap();
    assert_eq!(net.n_buses(), 30);
    assert_eq!(net.n_loads(), 20);
}

#[test]
fn ieee30_counts_match_case_file() {
    let net = load_network(fixture("ieee30.json")).unwrap();
    let text = std::fs::read_to_string(fixture("case30.m")).unwrap();
    assert_eq!(net.n_lines(), count_table_rows(&text, "branch"));
    assert_eq!(net.n_gens(), count_table_rows(&text, "gen"));
    assert_eq!(net.n_buses(), count_table_rows(&text, "bus"));
}

#[test]
fn ieee30_json_matches_converted_case_file() {
    let case = read_matpower(fixture("case30.m")).unwrap();
    let mut converted = case.to_network_file("ieee30").unwrap();
    let mut shipped = load_network(fixture("ieee30.json")).unwrap().to_file();
    converted.source = None;
    shipped.source = None;
    assert_eq!(converted, shipped);
    assert!((case.loads_mw().iter().sum::<f64>() - 189.2).abs() < 1e-9);
}

#[test]
fn susceptance_rows_and_columns_sum_to_zero() {
    for name in ["ieee30.json", "pjm5.json", "three_bus.json", "two_bus.json"] {
        let net = load_network(fixture(name)).unwrap();
        let b = net.b();
        for j in 0..net.n_buses() {
            let col: f64 = (0..net.n_buses()).map(|i| b[(i, j)]).sum();
            assert!(col.abs() <= 1e-10, "{name} column {j}");
        }
        assert!(b.asymmetry() <= 1e-12);
    }
}

#[test]
fn state_attack_is_load_conserving() {
    let net = load_network(fixture("ieee30.json")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let c: Vec<f64> = (0..net.n_buses()).map(|_| rng.random_range(-0.1..0.1)).collect();
        let bc = net.b().mul_vec(&c);
        let sum: f64 = bc.iter().map(|v| -v).sum();
        let l1: f64 = bc.iter().map(|v| v.abs()).sum();
        assert!(sum.abs() <= 1e-8 * l1);
    }
}

#[test]
fn slack_injection_moves_nothing() {
    let net = load_network(fixture("ieee30.json")).unwrap();
    let mut inj = vec![0.0; net.n_buses()];
    inj[net.slack] = 1.0;
    assert!(line_flows(&net, &inj).unwrap().iter().all(|&f| f == 0.0));
}

#[test]
fn triangle_splits_two_thirds_one_third() {
    let text = r#"{"buses":[{"id":1},{"id":2},{"id":3}],
        "lines":[{"from":1,"to":2,"x":1,"rating_mw":9},{"from":2,"to":3,"x":1,"rating_mw":9},{"from":1,"to":3,"x":1,"rating_mw":9}],
        "generators":[],"slack_bus":1,"load_buses":[2,3]}"#;
    let net = NetworkModel::from_file(&serde_json::from_str(text).unwrap()).unwrap();
    // hand solve: reduced B = [[2,-1],[-1,2]], injection 1 at bus 2
    let det = 2.0 * 2.0 - 1.0;
    let theta2 = 2.0 / det;
    let theta3 = 1.0 / det;
    let expect = [(0.0 - theta2) / 1.0, (theta2 - theta3) / 1.0, (0.0 - theta3) / 1.0];
    let f = line_flows(&net, &[0.0, 1.0, 0.0]).unwrap();
    for (a, b) in f.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{f:?}");
    }
    assert!((f[0].abs() - 2.0 / 3.0).abs() < 1e-12 && (f[2].abs() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn balanced_pair_flow_equals_injection() {
    let net = load_network(fixture("two_bus.json")).unwrap();
    let f = line_flows(&net, &[5.0, -5.0]).unwrap();
    assert!((f[0] - 5.0).abs() < 1e-12);
}

#[test]
fn single_precision_matrices_track_double() {
    let net = load_network(fixture("ieee30.json")).unwrap();
    let r32 = ptdf_matrix::<f32>(&net).unwrap();
    let b32 = susceptance_matrix::<f32>(&net);
    for i in 0..net.n_lines() {
        for j in 0..net.n_buses() {
            assert!((f64::from(r32[(i, j)]) - net.ptdf()[(i, j)]).abs() < 1e-4);
        }
    }
    assert!((f64::from(b32[(0, 0)]) - net.b()[(0, 0)]).abs() < 1e-3);
}

#[test]
fn malformed_file_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\n  \"buses\": [\n    {\"id\": \"one\"}\n  ]\n}").unwrap();
    match load_network(&p) {
        Err(GridError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_rating_fixture_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("zero.json");
    let text = std::fs::read_to_string(fixture("two_bus.json")).unwrap().replace("500", "0");
    std::fs::write(&p, text).unwrap();
    let err = load_network(&p).unwrap_err();
    assert!(matches!(err, GridError::Invalid(ref m) if m.contains("rating")), "{err}");
}
