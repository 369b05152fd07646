use approx::assert_relative_eq;
use serde::Deserialize;

use synsel_core::behavior::{paired_t_test, pearson_correlation, welch_t_test};

#[derive(Deserialize)]
struct Fixture {
    a: Vec<f64>,
    b: Vec<f64>,
    t: f64,
    p: f64,
    welch_t: f64,
    welch_p: f64,
    r: f64,
}

#[derive(Deserialize)]
struct Fixtures {
    fixtures: Vec<Fixture>,
}

fn fixtures() -> Vec<Fixture> {
    serde_json::from_str::<Fixtures>(include_str!("fixtures/stats_reference.json")).unwrap().fixtures
}

#[test]
fn paired_t_matches_reference() {
    let all = fixtures();
    assert_eq!(all.len(), 100);
    for f in &all {
        let t = paired_t_test(&f.a, &f.b).unwrap();
        assert_relative_eq!(t.t, f.t, epsilon = 1e-9, max_relative = 1e-9);
        assert_relative_eq!(t.p, f.p, epsilon = 1e-9, max_relative = 1e-9);
        assert_eq!(t.df, (f.a.len() - 1) as f64);
    }
}

#[test]
fn welch_t_matches_reference() {
    for f in &fixtures() {
        let t = welch_t_test(&f.a, &f.b).unwrap();
        assert_relative_eq!(t.t, f.welch_t, epsilon = 1e-9, max_relative = 1e-9);
        assert_relative_eq!(t.p, f.welch_p, epsilon = 1e-9, max_relative = 1e-9);
    }
}

#[test]
fn pearson_matches_reference() {
    for f in &fixtures() {
        assert_relative_eq!(pearson_correlation(&f.a, &f.b).unwrap(), f.r, epsilon = 1e-9);
    }
}

#[test]
fn accuracy_delta_table_correlation() {
    let rows: Vec<(f64, f64)> = include_str!("fixtures/acc_delta_by_pair.csv")
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 30);
    let (acc, delta): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let r = pearson_correlation(&acc, &delta).unwrap();
    // independently: statistics.correlation over the same 30 rows
    assert_relative_eq!(r, 0.868_978_815_508_835_4, epsilon = 1e-12);
    assert!((r - 0.87).abs() <= 0.03);
}
