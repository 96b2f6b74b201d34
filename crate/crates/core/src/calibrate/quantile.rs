use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::LEVEL_EPS;

/// Rank `q` of the order statistic that is the `level` quantile of `m`
/// equally weighted values: the smallest `q` with `q / m ≥ level`. Returns
/// `0` when the quantile is `-∞` and `m + 1` when it is `+∞`.
pub fn quantile_rank(level: f64, m: usize) -> usize {
    if level <= 0.0 {
        return 0;
    }
    if level > 1.0 {
        return m + 1;
    }
    let q = (level * m as f64 - 1e-9).ceil();
    (q.max(1.0) as usize).min(m)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

pub(crate) fn check_weights(values: usize, weights: &[f64], tol: f64) -> Result<()> {
    if weights.len() != values {
        return Err(Error::DimensionMismatch { expected: values, got: weights.len() });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(invalid(format!("weights must be finite and non-negative, got {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(invalid(format!("weights must sum to 1, got {total}")));
    }
    Ok(())
}

/// `inf{x : F(x) ≥ level}` for the (weighted) empirical law of `values`.
/// Unweighted values each carry mass `1/m`.
pub fn finite_quantile(values: &[f64], weights: Option<&[f64]>, level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile values"));
    }
    match weights {
        None => {
            let q = quantile_rank(level, values.len());
            if q == 0 {
                return Ok(f64::NEG_INFINITY);
            }
            if q > values.len() {
                return Ok(f64::INFINITY);
            }
            let mut sorted = values.to_vec();
            let (_, v, _) = sorted.select_nth_unstable_by(q - 1, f64::total_cmp);
            Ok(*v)
        }
        Some(w) => {
            check_weights(values.len(), w, 1e-9)?;
            if level <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let mut cum = 0.0;
            for i in order {
                cum += w[i];
                if cum >= level - LEVEL_EPS {
                    return Ok(values[i]);
                }
            }
            Ok(f64::INFINITY)
        }
    }
}

/// Whether `psi ≤ Q_level` of equally weighted `values`, decided by
/// counting: `#{v < psi} < q`.
pub fn keeps_unweighted(values: &[f64], psi: f64, level: f64) -> bool {
    let q = quantile_rank(level, values.len());
    let below = values.iter().filter(|&&v| v < psi).count();
    below < q
}

/// Whether `psi ≤ Q_level` of the weighted law, decided by
/// `Σ_{v < psi} w < level`. Weights are accumulated in index order.
pub fn keeps_weighted(values: &[f64], weights: &[f64], psi: f64, level: f64) -> bool {
    let mut below = 0.0;
    for (v, w) in values.iter().zip(weights) {
        if *v < psi {
            below += w;
        }
    }
    below < level - LEVEL_EPS
}

/// The group quantile `t` with the CDF quantities needed for randomized
/// sets: `F(t)`, `F⁻(t)`, the jump `F'(t)` and `Δ = (level - F⁻)/F'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub cdf_at_t: f64,
    pub cdf_left: f64,
    pub jump: f64,
    pub delta: f64,
    pub level: f64,
}

impl Threshold {
    pub fn from_values(values: &[f64], weights: Option<&[f64]>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let level = 1.0 - alpha;
        let value = finite_quantile(values, weights, level)?;
        let m = values.len() as f64;
        let (mut at, mut left) = (0.0, 0.0);
        for (i, &v) in values.iter().enumerate() {
            let w = weights.map_or(1.0 / m, |w| w[i]);
            if v <= value {
                at += w;
            }
            if v < value {
                left += w;
            }
        }
        if weights.is_none() {
            let le = values.iter().filter(|&&v| v <= value).count() as f64;
            let lt = values.iter().filter(|&&v| v < value).count() as f64;
            at = le / m;
            left = lt / m;
        }
        let jump = at - left;
        let delta = if jump > 0.0 { ((level - left) / jump).clamp(0.0, 1.0) } else { 0.0 };
        Ok(Self { value, cdf_at_t: at, cdf_left: left, jump, delta, level })
    }

    pub fn keeps(&self, psi: f64) -> bool {
        psi <= self.value
    }

    /// Randomized rule: strictly below `t`, or tied with `u' < Δ`.
    pub fn keeps_randomized(&self, psi: f64, u_prime: f64) -> bool {
        psi < self.value || (psi == self.value && u_prime < self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_examples() {
        assert_eq!(finite_quantile(&[1.0, 2.0, 3.0, 4.0], None, 0.75).unwrap(), 3.0);
        for level in [0.01, 0.5, 1.0] {
            assert_eq!(finite_quantile(&[5.0], None, level).unwrap(), 5.0);
        }
        assert_eq!(finite_quantile(&[1.0, 2.0, 3.0], Some(&[0.1, 0.1, 0.8]), 0.5).unwrap(), 3.0);
        assert!(finite_quantile(&[], None, 0.5).is_err());
    }

    #[test]
    fn quantile_edges() {
        assert_eq!(finite_quantile(&[1.0, 2.0], None, 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(finite_quantile(&[1.0, 2.0], None, 1.5).unwrap(), f64::INFINITY);
        assert_eq!(quantile_rank(0.95, 20), 19);
        assert_eq!(quantile_rank(0.95, 300), 285);
        assert_eq!(quantile_rank(0.85, 20), 17);
        assert!(finite_quantile(&[1.0, 2.0], Some(&[0.5, 0.6]), 0.5).is_err());
    }

    #[test]
    fn brute_force_against_definition() {
        let values = [0.3, -1.0, 2.0, 2.0, 0.3, 7.0, -4.5];
        for i in 0..=100 {
            let level = i as f64 / 100.0;
            let got = finite_quantile(&values, None, level).unwrap();
            let cdf = |x: f64| values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64;
            let expected = values
                .iter()
                .copied()
                .filter(|&x| cdf(x) >= level - 1e-12)
                .fold(f64::INFINITY, f64::min);
            let expected = if level <= 0.0 { f64::NEG_INFINITY } else { expected };
            assert_eq!(got, expected, "level {level}");
        }
    }

    #[test]
    fn trivial_threshold() {
        let t = Threshold::from_values(&[2.5], None, 0.1).unwrap();
        assert_eq!(t.value, 2.5);
        assert_eq!(t.jump, 1.0);
        assert!((t.delta - 0.9).abs() < 1e-12);
    }

    #[test]
    fn four_distinct_values() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(Threshold::from_values(&v, None, 0.25).unwrap().value, 3.0);
        let t = Threshold::from_values(&v, None, 0.2).unwrap();
        assert_eq!(t.value, 4.0);
        assert_eq!(t.cdf_left, 0.75);
        assert_eq!(t.jump, 0.25);
        assert!((t.delta - 0.2).abs() < 1e-12);
        assert!(t.keeps_randomized(4.0, 0.19));
        assert!(!t.keeps_randomized(4.0, 0.21));
    }

    #[test]
    fn counting_rules_match_threshold() {
        let v = [0.5, 1.5, 1.5, 3.0, -2.0, 0.0];
        let w = [0.1, 0.2, 0.05, 0.3, 0.15, 0.2];
        for alpha in [0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
            let t = Threshold::from_values(&v, None, alpha).unwrap();
            let tw = Threshold::from_values(&v, Some(&w), alpha).unwrap();
            for psi in [-3.0, -2.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
                assert_eq!(keeps_unweighted(&v, psi, 1.0 - alpha), t.keeps(psi));
                assert_eq!(keeps_weighted(&v, &w, psi, 1.0 - alpha), tw.keeps(psi));
            }
        }
    }
}
