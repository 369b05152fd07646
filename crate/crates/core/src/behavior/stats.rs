//! Paired and Welch t-tests and Pearson correlation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
fn variance(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::StatsInput(e.to_string()))?;
    Ok((2.0 * dist.cdf(-t.abs())).min(1.0))
}

fn check_finite(name: &str, x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::StatsInput(format!("{name} contains non-finite values")));
    }
    Ok(())
}

/// Two-sided paired t-test on `a[i] - b[i]` with n−1 degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::StatsInput(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::StatsInput("paired t-test needs at least 2 pairs".into()));
    }
    check_finite("a", a)?;
    check_finite("b", b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    let var = variance(&d, m);
    if var <= 1e-24 * m.abs().max(1.0).powi(2) {
        return Err(Error::Degenerate(format!(
            "zero variance in {} paired differences (all equal {m})",
            d.len()
        )));
    }
    let n = d.len() as f64;
    let t = m / (var / n).sqrt();
    let df = n - 1.0;
    Ok(TTest { t, p: two_sided_p(t, df)?, df })
}

/// Two-sided Welch t-test for unequal variances.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::StatsInput("Welch t-test needs at least 2 values per sample".into()));
    }
    check_finite("a", a)?;
    check_finite("b", b)?;
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (variance(a, ma) / a.len() as f64, variance(b, mb) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(TTest { t, p: two_sided_p(t, df)?, df })
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::StatsInput(format!("samples differ in length: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::StatsInput("correlation needs at least 2 points".into()));
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance in correlation input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_paired_example() {
        let r = paired_t_test(&[0.9, 0.8, 0.95], &[0.2, 0.3, 0.25]).unwrap();
        assert!(r.t > 0.0 && r.p < 0.05);
        assert!((r.t - 9.5).abs() < 1e-9);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        assert!(matches!(paired_t_test(&[0.5, 0.7], &[0.5, 0.7]), Err(Error::Degenerate(_))));
        assert!(matches!(paired_t_test(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn linear_relation_correlates_perfectly() {
        let x = [0.1, 0.4, 0.2, 0.9];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_correlation(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
        assert!(pearson_correlation(&[1.0], &[1.0]).is_err());
    }
}
