//! Fairness measures over per-agent return vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalarisation of a return vector into a single fairness score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub enum FairnessMeasure {
    /// Smallest entry.
    #[default]
    MinWelfare,
    /// Generalized Gini welfare: ascending-sorted returns weighted by
    /// non-increasing, non-negative weights summing to one.
    Ggf(Vec<f64>),
    /// Product of the returns. Undefined for negative entries.
    NashWelfare,
}


impl FairnessMeasure {
    /// GGF with validated weights.
    pub fn ggf(weights: Vec<f64>) -> Result<Self> {
        validate_ggf_weights(&weights)?;
        Ok(FairnessMeasure::Ggf(weights))
    }

    /// GGF with weights proportional to `2^-(k-1)`, normalised.
    pub fn ggf_default(n: usize) -> Self {
        let raw: Vec<f64> = (0..n).map(|k| 0.5f64.powi(k as i32)).collect();
        let total: f64 = raw.iter().sum();
        FairnessMeasure::Ggf(raw.into_iter().map(|w| w / total).collect())
    }

    /// Parses `min`, `nash`, `ggf` (default weights for `n` agents) or
    /// `ggf:w1,w2,...`.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let text = text.trim();
        match text {
            "min" | "min_welfare" | "minwelfare" => Ok(FairnessMeasure::MinWelfare),
            "nash" | "nash_welfare" | "nashsw" => Ok(FairnessMeasure::NashWelfare),
            "ggf" => Ok(FairnessMeasure::ggf_default(n)),
            other => {
                if let Some(rest) = other.strip_prefix("ggf:") {
                    let weights = rest
                        .split(',')
                        .map(|w| {
                            w.trim().parse::<f64>().map_err(|_| {
                                Error::Config(format!("invalid GGF weight `{}`", w.trim()))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if weights.len() != n {
                        return Err(Error::Config(format!(
                            "GGF needs {n} weights, got {}",
                            weights.len()
                        )));
                    }
                    FairnessMeasure::ggf(weights)
                } else {
                    Err(Error::Config(format!("unknown fairness measure `{other}`")))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            FairnessMeasure::MinWelfare => "min".to_string(),
            FairnessMeasure::NashWelfare => "nash".to_string(),
            FairnessMeasure::Ggf(w) => {
                let parts: Vec<String> = w.iter().map(|x| format!("{x}")).collect();
                format!("ggf:{}", parts.join(","))
            }
        }
    }

    /// Checked evaluation against an expected agent count.
    pub fn evaluate(&self, returns: &[f64], agents: usize) -> Result<f64> {
        if returns.len() != agents {
            return Err(Error::Config(format!(
                "return vector has {} entries, expected {agents}",
                returns.len()
            )));
        }
        if let FairnessMeasure::Ggf(w) = self {
            if w.len() != agents {
                return Err(Error::Config(format!(
                    "GGF has {} weights, expected {agents}",
                    w.len()
                )));
            }
        }
        if matches!(self, FairnessMeasure::NashWelfare) {
            if let Some(v) = returns.iter().find(|v| **v < 0.0) {
                return Err(Error::Domain(format!(
                    "Nash welfare is undefined for negative return {v}"
                )));
            }
        }
        Ok(self.score(returns))
    }

    /// Unchecked hot-path evaluation. Nash welfare of a vector with a
    /// negative entry is `-inf` here so that such candidates are never
    /// preferred during greedy selection.
    pub fn score(&self, returns: &[f64]) -> f64 {
        match self {
            FairnessMeasure::MinWelfare => returns.iter().copied().fold(f64::INFINITY, f64::min),
            FairnessMeasure::NashWelfare => {
                if returns.iter().any(|v| *v < 0.0) {
                    f64::NEG_INFINITY
                } else {
                    returns.iter().product()
                }
            }
            FairnessMeasure::Ggf(weights) => {
                let mut sorted = returns.to_vec();
                sorted.sort_by(f64::total_cmp);
                sorted.iter().zip(weights).map(|(r, w)| r * w).sum()
            }
        }
    }
}

pub fn min_welfare(returns: &[f64]) -> f64 {
    FairnessMeasure::MinWelfare.score(returns)
}

fn validate_ggf_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Config("GGF needs at least one weight".into()));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Config("GGF weights must be finite and non-negative".into()));
    }
    if w.windows(2).any(|p| p[0] < p[1]) {
        return Err(Error::Config("GGF weights must be non-increasing".into()));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("GGF weights sum to {total}, not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        let two = 2;
        assert_eq!(FairnessMeasure::MinWelfare.evaluate(&[6.0, 2.0], two).unwrap(), 2.0);
        let ggf = FairnessMeasure::ggf(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let v = ggf.evaluate(&[3.0, 1.0], two).unwrap();
        assert!((v - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(FairnessMeasure::NashWelfare.evaluate(&[2.0, 3.0], two).unwrap(), 6.0);
        let degenerate = FairnessMeasure::ggf(vec![1.0, 0.0]).unwrap();
        assert_eq!(degenerate.evaluate(&[5.0, 9.0], two).unwrap(), 5.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            FairnessMeasure::MinWelfare.evaluate(&[1.0], 2),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            FairnessMeasure::NashWelfare.evaluate(&[1.0, -0.5], 2),
            Err(Error::Domain(_))
        ));
        assert!(FairnessMeasure::ggf(vec![0.2, 0.8]).is_err());
        assert!(FairnessMeasure::ggf(vec![0.6, 0.6]).is_err());
        assert!(FairnessMeasure::parse("bogus", 2).is_err());
    }

    #[test]
    fn default_ggf_weights_halve() {
        let FairnessMeasure::Ggf(w) = FairnessMeasure::ggf_default(3) else {
            unreachable!()
        };
        assert!((w[0] - 4.0 / 7.0).abs() < 1e-12);
        assert!((w[1] - 2.0 / 7.0).abs() < 1e-12);
        assert!((w[2] - 1.0 / 7.0).abs() < 1e-12);
        assert!(FairnessMeasure::ggf(w).is_ok());
    }

    #[test]
    fn parse_round_trip() {
        let m = FairnessMeasure::parse("ggf:0.75,0.25", 2).unwrap();
        assert_eq!(FairnessMeasure::parse(&m.name(), 2).unwrap(), m);
        assert_eq!(FairnessMeasure::parse("min", 4).unwrap(), FairnessMeasure::MinWelfare);
    }

    fn returns(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, n)
    }

    proptest! {
        #[test]
        fn ggf_with_unit_head_is_min_welfare(v in (2usize..6).prop_flat_map(returns)) {
            let mut w = vec![0.0; v.len()];
            w[0] = 1.0;
            let ggf = FairnessMeasure::Ggf(w);
            prop_assert_eq!(ggf.score(&v), FairnessMeasure::MinWelfare.score(&v));
        }

        #[test]
        fn measures_ignore_agent_order(v in (2usize..6).prop_flat_map(returns), rot in 0usize..6) {
            let n = v.len();
            let mut shuffled = v.clone();
            shuffled.rotate_left(rot % n);
            shuffled.reverse();
            let ggf = FairnessMeasure::ggf_default(n);
            prop_assert_eq!(ggf.score(&v), ggf.score(&shuffled));
            prop_assert_eq!(
                FairnessMeasure::MinWelfare.score(&v),
                FairnessMeasure::MinWelfare.score(&shuffled)
            );
            let positive: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            let mut positive_shuffled = positive.clone();
            positive_shuffled.rotate_left(rot % n);
            let a = FairnessMeasure::NashWelfare.score(&positive);
            let b = FairnessMeasure::NashWelfare.score(&positive_shuffled);
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
