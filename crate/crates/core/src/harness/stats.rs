//! Welch's t-test and smoothing helpers for comparing selectors.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::harness::run::mean_std;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for `mean(a) > mean(b)`.
    pub p: f64,
}

/// One-sided Welch test of `mean(a) > mean(b)`.
///
/// When both samples have zero variance the comparison is exact: a strictly
/// larger mean gives `t = +∞, p = 0`, otherwise `p = 1`.
pub fn welch_greater(a: &[f64], b: &[f64]) -> TTest {
    assert!(a.len() >= 2 && b.len() >= 2, "each sample needs two values");
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let va = sa * sa / a.len() as f64;
    let vb = sb * sb / b.len() as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        let (t, p) = if ma > mb { (f64::INFINITY, 0.0) } else if ma < mb { (f64::NEG_INFINITY, 1.0) } else { (0.0, 1.0) };
        return TTest { t, df: f64::INFINITY, p };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    TTest { t, df, p: 1.0 - dist.cdf(t) }
}

/// Trailing moving average with the given window (shorter at the start).
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_matches_a_hand_computed_case() {
        // Means 3 and 1, sample variances 1 and 1, n = 3: t = 2/sqrt(2/3), df = 4.
        let r = welch_greater(&[2.0, 3.0, 4.0], &[0.0, 1.0, 2.0]);
        assert!((r.t - 2.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.df - 4.0).abs() < 1e-12);
        // t = 2.449 with 4 df: one-sided p ≈ 0.0353.
        assert!((r.p - 0.0353).abs() < 1e-3, "{}", r.p);
    }

    #[test]
    fn degenerate_samples_compare_exactly() {
        assert_eq!(welch_greater(&[24.0; 5], &[18.0; 5]).p, 0.0);
        assert_eq!(welch_greater(&[18.0; 5], &[18.0; 5]).p, 1.0);
        assert_eq!(welch_greater(&[8.0; 5], &[18.0; 5]).p, 1.0);
    }

    #[test]
    fn smoothing_window() {
        assert_eq!(smooth(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert_eq!(variance(&[1.0, 3.0]), 1.0);
    }
}
