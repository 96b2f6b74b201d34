//! Small statistical helpers: moments, a sliced energy-distance permutation
//! test and empirical total variation.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator; zero for `n < 2`.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Outcome of a two-sample test.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSampleTest {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Settings for [`energy_test`].
#[derive(Clone, Copy, Debug)]
pub struct EnergyTestConfig {
    pub permutations: usize,
    /// Random unit directions for multivariate data. Ignored in one dimension.
    pub projections: usize,
}

impl Default for EnergyTestConfig {
    fn default() -> Self {
        Self { permutations: 200, projections: 16 }
    }
}

/// Two-sample permutation test based on the energy distance of random
/// one-dimensional projections.
///
/// The energy distance in `R^d` is proportional to the average energy
/// distance of projections onto uniform directions, so averaging over a few
/// directions keeps the test consistent while each permutation costs `O(N)`
/// once the pooled projections are sorted.
pub fn energy_test(x: &[Vec<f64>], y: &[Vec<f64>], config: EnergyTestConfig, rng: &mut dyn RngCore) -> Result<TwoSampleTest> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("energy test sample"));
    }
    if config.permutations == 0 {
        return Err(invalid("energy test needs at least one permutation"));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().chain(y).find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    if dim == 0 {
        return Err(invalid("energy test on zero-dimensional points"));
    }

    let directions: Vec<Vec<f64>> = if dim == 1 {
        vec![vec![1.0]]
    } else {
        (0..config.projections.max(1))
            .map(|_| {
                let w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
                let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
                w.into_iter().map(|a| a / norm).collect()
            })
            .collect()
    };

    let n = x.len();
    let sorted: Vec<(Vec<f64>, Vec<usize>)> = directions
        .iter()
        .map(|d| {
            let mut proj: Vec<(f64, usize)> = x
                .iter()
                .chain(y)
                .enumerate()
                .map(|(i, p)| (p.iter().zip(d).map(|(a, b)| a * b).sum::<f64>(), i))
                .collect();
            proj.sort_by(|a, b| a.0.total_cmp(&b.0));
            proj.into_iter().unzip()
        })
        .collect();

    let mut labels: Vec<bool> = (0..x.len() + y.len()).map(|i| i < n).collect();
    let observed = sliced_statistic(&sorted, &labels, n);
    let mut exceed = 0usize;
    for _ in 0..config.permutations {
        labels.shuffle(&mut *rng);
        if sliced_statistic(&sorted, &labels, n) >= observed {
            exceed += 1;
        }
    }
    Ok(TwoSampleTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + config.permutations) as f64,
        permutations: config.permutations,
    })
}

fn sliced_statistic(sorted: &[(Vec<f64>, Vec<usize>)], labels: &[bool], n: usize) -> f64 {
    let total: f64 = sorted.iter().map(|(v, idx)| energy_1d(v, idx, labels, n)).sum();
    total / sorted.len() as f64
}

/// Scaled one-dimensional energy statistic `nm/(n+m) · E` for pooled values
/// sorted ascending, with `labels[idx[j]]` marking membership of the first
/// sample.
fn energy_1d(values: &[f64], idx: &[usize], labels: &[bool], n: usize) -> f64 {
    let m = values.len() - n;
    let (mut cnt_a, mut sum_a, mut pairs_a) = (0.0, 0.0, 0.0);
    let (mut cnt_b, mut sum_b, mut pairs_b) = (0.0, 0.0, 0.0);
    let (mut cnt, mut sum, mut pairs_all) = (0.0, 0.0, 0.0);
    for (v, &i) in values.iter().zip(idx) {
        pairs_all += cnt * v - sum;
        cnt += 1.0;
        sum += v;
        if labels[i] {
            pairs_a += cnt_a * v - sum_a;
            cnt_a += 1.0;
            sum_a += v;
        } else {
            pairs_b += cnt_b * v - sum_b;
            cnt_b += 1.0;
            sum_b += v;
        }
    }
    let (nf, mf) = (n as f64, m as f64);
    let across = pairs_all - pairs_a - pairs_b;
    let e = 2.0 * across / (nf * mf) - 2.0 * pairs_a / (nf * nf) - 2.0 * pairs_b / (mf * mf);
    nf * mf / (nf + mf) * e
}

/// Total variation distance between the empirical laws of two samples of
/// discrete values (compared bit for bit).
pub fn empirical_tv(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("total variation sample"));
    }
    let mut counts: HashMap<u64, (usize, usize)> = HashMap::new();
    for &v in a {
        counts.entry(canonical_bits(v)).or_default().0 += 1;
    }
    for &v in b {
        counts.entry(canonical_bits(v)).or_default().1 += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    Ok(0.5 * counts.values().map(|&(p, q)| (p as f64 / na - q as f64 / nb).abs()).sum::<f64>())
}

/// Total variation between histograms of two continuous samples on a shared
/// grid of `bins` equal-width cells over the pooled range.
pub fn empirical_tv_binned(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("total variation sample"));
    }
    if bins == 0 {
        return Err(invalid("histogram needs at least one bin"));
    }
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let cell = |v: f64| if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
    let mut p = vec![0.0; bins];
    let mut q = vec![0.0; bins];
    for &v in a {
        p[cell(v)] += 1.0 / a.len() as f64;
    }
    for &v in b {
        q[cell(v)] += 1.0 / b.len() as f64;
    }
    Ok(0.5 * p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

fn canonical_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::Normal;

    fn brute_energy(x: &[f64], y: &[f64]) -> f64 {
        let avg = |a: &[f64], b: &[f64]| {
            a.iter().flat_map(|u| b.iter().map(move |v| (u - v).abs())).sum::<f64>() / (a.len() * b.len()) as f64
        };
        let (n, m) = (x.len() as f64, y.len() as f64);
        n * m / (n + m) * (2.0 * avg(x, y) - avg(x, x) - avg(y, y))
    }

    #[test]
    fn one_dimensional_statistic_matches_pairwise_formula() {
        let x = [0.3, -1.2, 2.5, 0.0];
        let y = [1.0, 1.5, -0.7];
        let pooled: Vec<f64> = x.iter().chain(&y).copied().collect();
        let mut order: Vec<usize> = (0..pooled.len()).collect();
        order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
        let values: Vec<f64> = order.iter().map(|&i| pooled[i]).collect();
        let labels: Vec<bool> = (0..pooled.len()).map(|i| i < x.len()).collect();
        let fast = energy_1d(&values, &order, &labels, x.len());
        assert!((fast - brute_energy(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn energy_test_separates_shifted_samples() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let draw = |rng: &mut ChaCha20Rng, shift: f64| -> Vec<Vec<f64>> {
            (0..400).map(|_| vec![normal.sample(rng) + shift, normal.sample(rng)]).collect()
        };
        let a = draw(&mut rng, 0.0);
        let b = draw(&mut rng, 0.0);
        let c = draw(&mut rng, 0.5);
        let same = energy_test(&a, &b, EnergyTestConfig::default(), &mut rng).unwrap();
        let diff = energy_test(&a, &c, EnergyTestConfig::default(), &mut rng).unwrap();
        assert!(same.p_value > 0.01, "{same:?}");
        assert!(diff.p_value < 0.01, "{diff:?}");
    }

    #[test]
    fn energy_test_rejects_bad_input() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(energy_test(&[], &[vec![1.0]], EnergyTestConfig::default(), &mut rng).is_err());
        assert!(matches!(
            energy_test(&[vec![1.0]], &[vec![1.0, 2.0]], EnergyTestConfig::default(), &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn total_variation_edge_cases() {
        assert_eq!(empirical_tv(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(empirical_tv(&[-1.0; 5], &[1.0; 3]).unwrap(), 1.0);
        assert!((empirical_tv(&[0.0, 1.0], &[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(empirical_tv_binned(&[0.0, 1.0], &[0.0, 1.0], 4).unwrap(), 0.0);
    }

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((sample_sd(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(sample_sd(&[4.0]), 0.0);
    }
}
