use std::collections::HashSet;

use crate::error::{invalid, Error, Result};
use crate::groups::GroupAction;
use crate::stats::{empirical_tv, empirical_tv_binned};

/// Samples with at most this many distinct values are compared exactly.
const DISCRETE_SUPPORT: usize = 64;

/// `|H|/|G|` where `H` fixes `ψ` on every probe: the excess of the coverage
/// over `1 - α` is at most this ratio. Elements are streamed, not stored.
pub fn overcoverage_bound<A, P>(action: &A, psi: P, probes: &[A::Point]) -> Result<f64>
where
    A: GroupAction,
    P: Fn(&A::Point) -> f64,
{
    if probes.is_empty() {
        return Err(Error::Empty("probe set"));
    }
    let elements = action
        .elements()
        .ok_or_else(|| Error::NotEnumerable("over-coverage bound needs an enumerable group".into()))?;
    let base: Vec<u64> = probes.iter().map(|p| psi(p).to_bits()).collect();
    let (mut total, mut fixed) = (0u128, 0u128);
    for g in elements {
        total += 1;
        if probes.iter().zip(&base).all(|(p, b)| psi(&action.act(&g, p)).to_bits() == *b) {
            fixed += 1;
        }
    }
    Ok(fixed as f64 / total as f64)
}

/// Probe vectors of length `n` whose coordinates are pairwise distinct.
pub fn default_probes(n: usize) -> Vec<Vec<f64>> {
    let golden = 0.618_033_988_749_895;
    vec![
        (1..=n).map(|i| i as f64).collect(),
        (1..=n).map(|i| (i as f64 * golden).fract() + i as f64).collect(),
    ]
}

/// Empirical total variation between two samples of `ν = ψ - t`. Exact
/// when both samples take few distinct values, histogram-based otherwise.
/// This is an estimate of the shift gap, not a certified bound.
pub fn estimate_shift_gap(invariant: &[f64], shifted: &[f64]) -> Result<f64> {
    if invariant.is_empty() || shifted.is_empty() {
        return Err(Error::Empty("shift-gap sample"));
    }
    if invariant.iter().chain(shifted).any(|v| !v.is_finite()) {
        return Err(invalid("shift-gap samples must be finite"));
    }
    let distinct: HashSet<u64> = invariant.iter().chain(shifted).map(|v| (v + 0.0).to_bits()).collect();
    if distinct.len() <= DISCRETE_SUPPORT {
        empirical_tv(invariant, shifted)
    } else {
        let n = invariant.len().min(shifted.len()) as f64;
        let bins = (n.sqrt().round() as usize).clamp(2, 200);
        empirical_tv_binned(invariant, shifted, bins)
    }
}

/// [`estimate_shift_gap`] averaged over coset representatives with the given
/// weights; each pair holds the two samples for one representative.
pub fn estimate_shift_gap_weighted(pairs: &[(Vec<f64>, Vec<f64>)], weights: &[f64]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("shift-gap pairs"));
    }
    super::quantile::check_weights(pairs.len(), weights, 1e-9)?;
    pairs
        .iter()
        .zip(weights)
        .try_fold(0.0, |acc, ((a, b), w)| Ok(acc + w * estimate_shift_gap(a, b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{BlockPermutationGroup, SymmetricGroup, TrivialGroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand::distr::weighted::WeightedIndex;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn symmetric_last_coordinate() {
        let g = SymmetricGroup::new(4).unwrap();
        let b = overcoverage_bound(&g, |z: &Vec<f64>| z[3], &default_probes(4)).unwrap();
        assert_eq!(b, 0.25);
    }

    #[test]
    fn trivial_and_block() {
        let t = TrivialGroup { n: 3 };
        assert_eq!(overcoverage_bound(&t, |z: &Vec<f64>| z[2], &default_probes(3)).unwrap(), 1.0);
        let g = BlockPermutationGroup::new(2, 2).unwrap();
        assert_eq!(overcoverage_bound(&g, |z: &Vec<f64>| z[3], &default_probes(4)).unwrap(), 0.25);
        assert!(overcoverage_bound(&g, |z: &Vec<f64>| z[3], &[]).is_err());
    }

    #[test]
    fn point_masses_are_fully_separated() {
        assert_eq!(estimate_shift_gap(&[-1.0; 50], &[1.0; 70]).unwrap(), 1.0);
    }

    #[test]
    fn identical_laws_give_small_gap() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let n = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..20_000).map(|_| n.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..20_000).map(|_| n.sample(&mut rng)).collect();
        assert!(estimate_shift_gap(&a, &b).unwrap() < 0.05);
    }

    #[test]
    fn discrete_support_matches_exact_tv() {
        let support = [-1.5, -0.5, 0.5, 2.0];
        let (p, q) = ([0.1, 0.2, 0.3, 0.4], [0.25, 0.25, 0.25, 0.25]);
        let exact = 0.5 * p.iter().zip(&q).map(|(a, b): (&f64, &f64)| (a - b).abs()).sum::<f64>();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (dp, dq) = (WeightedIndex::new(p).unwrap(), WeightedIndex::new(q).unwrap());
        let a: Vec<f64> = (0..100_000).map(|_| support[dp.sample(&mut rng)]).collect();
        let b: Vec<f64> = (0..100_000).map(|_| support[dq.sample(&mut rng)]).collect();
        assert!((estimate_shift_gap(&a, &b).unwrap() - exact).abs() < 0.02);
    }

    #[test]
    fn weighted_average() {
        let pairs = vec![(vec![1.0], vec![1.0]), (vec![0.0], vec![1.0])];
        assert_eq!(estimate_shift_gap_weighted(&pairs, &[0.25, 0.75]).unwrap(), 0.75);
    }
}
