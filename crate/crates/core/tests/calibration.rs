use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution};

use synsel_core::quiz::{calibrate_with, CALIBRATION_QUIZZES};

/// 40 sets with fixed true accuracies; every quiz question is a Bernoulli draw.
fn simulated(k: usize, quiz_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(quiz_seed.wrapping_mul(31).wrapping_add(k as u64));
    (0..40)
        .map(|i| {
            let p = 0.55 + 0.4 * i as f64 / 39.0;
            let coin = Bernoulli::new(p).unwrap();
            (0..k).filter(|_| coin.sample(&mut rng)).count() as f64 / k as f64
        })
        .collect()
}

#[test]
fn larger_quizzes_agree_more() {
    let report = calibrate_with(&[20, 200], 9, |k, s| Ok(simulated(k, s))).unwrap();
    let (small, large) = (&report.per_k[0], &report.per_k[1]);
    assert_eq!(small.correlations.len(), CALIBRATION_QUIZZES * (CALIBRATION_QUIZZES - 1) / 2);
    assert!(large.median.unwrap() >= small.median.unwrap(), "{report:?}");
    assert!(large.min.unwrap() > 0.8);
    for c in small.correlations.iter().chain(&large.correlations).flatten() {
        assert!((-1.0..=1.0).contains(c));
    }
}

#[test]
fn identical_quizzes_correlate_perfectly() {
    let report = calibrate_with(&[10, 30], 1, |k, _| Ok(simulated(k, 0))).unwrap();
    for row in &report.per_k {
        assert!((row.median.unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn constant_vectors_are_excluded() {
    let report = calibrate_with(&[5, 6], 1, |k, s| Ok(if s % 2 == 0 { vec![1.0; 4] } else { simulated(k, s)[..4].to_vec() })).unwrap();
    for row in &report.per_k {
        assert_eq!(row.correlations.len(), 10);
        assert_eq!(row.excluded, row.correlations.iter().filter(|c| c.is_none()).count());
    }
}
