use rand::RngCore;
use serde::Serialize;

use super::hierarchical::{flatten, hierarchical_proxy_transform, unflatten, HierarchicalUnsup};
use super::EquivariantMap;
use crate::error::{invalid, Error, Result};
use crate::groups::GroupAction;
use crate::stats::{energy_test, EnergyTestConfig};

/// Outcome of the distributional equivariance check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivarianceReport {
    pub statistic: f64,
    pub p_value: f64,
    pub passed: bool,
    pub samples: usize,
}

/// Smallest sample size accepted by the checker.
pub const MIN_SAMPLES: usize = 1000;

/// Tests `V(ρ(G)Z) =_d ρ̃(G)V(Z)` for uniform `G`.
///
/// Each side uses its own independent draws of `Z` and `G`, and the two
/// samples are compared with an energy-distance permutation test (200
/// permutations). The check passes when `p > 0.01`.
pub fn check_distributional_equivariance<A, B>(
    map: &dyn EquivariantMap,
    rho: &A,
    rho_tilde: &B,
    sampler: &dyn Fn(&mut dyn RngCore) -> Vec<f64>,
    n_samples: usize,
    rng: &mut dyn RngCore,
) -> Result<EquivarianceReport>
where
    A: GroupAction<Point = Vec<f64>>,
    B: GroupAction<Element = A::Element, Point = Vec<f64>>,
{
    if n_samples < MIN_SAMPLES {
        return Err(invalid(format!("equivariance check needs at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    let mut left = Vec::with_capacity(n_samples);
    let mut right = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let z = sampler(rng);
        let g = rho.sample_uniform(rng);
        left.push(map.apply(&rho.act(&g, &z))?);

        let z = sampler(rng);
        let g = rho.sample_uniform(rng);
        right.push(rho_tilde.act(&g, &map.apply(&z)?));
    }
    let dim = left[0].len();
    if let Some(bad) = left.iter().chain(&right).find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let test = energy_test(&left, &right, EnergyTestConfig::default(), rng)?;
    Ok(EquivarianceReport { statistic: test.statistic, p_value: test.p_value, passed: test.p_value > 0.01, samples: n_samples })
}

/// Maps available by name to the command line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BuiltinMap {
    Identity,
    /// Sorts the coordinates: invariant, not equivariant.
    Sort,
    /// `|z_j - median(z)|`.
    MedianDeviation,
    /// Adaptive hierarchical transform on flat `K × M` vectors.
    HierUnsup { blocks: usize, block_size: usize, c: f64 },
    /// Within-branch standardization on flat `K × M` vectors.
    HierProxy { blocks: usize, block_size: usize },
}

impl BuiltinMap {
    pub const NAMES: [&'static str; 5] = ["identity", "sort", "median-deviation", "hier-unsup", "hier-proxy"];

    pub fn from_name(name: &str, blocks: usize, block_size: usize, c: f64) -> Result<Self> {
        Ok(match name {
            "identity" => Self::Identity,
            "sort" => Self::Sort,
            "median-deviation" => Self::MedianDeviation,
            "hier-unsup" => Self::HierUnsup { blocks, block_size, c },
            "hier-proxy" => Self::HierProxy { blocks, block_size },
            other => {
                return Err(invalid(format!("unknown map '{other}', expected one of {}", Self::NAMES.join(", "))))
            }
        })
    }

    pub fn is_hierarchical(&self) -> bool {
        matches!(self, Self::HierUnsup { .. } | Self::HierProxy { .. })
    }
}

fn median(z: &[f64]) -> f64 {
    let mut s = z.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl EquivariantMap for BuiltinMap {
    fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        match *self {
            Self::Identity => Ok(z.to_vec()),
            Self::Sort => {
                let mut s = z.to_vec();
                s.sort_by(f64::total_cmp);
                Ok(s)
            }
            Self::MedianDeviation => {
                let m = median(z);
                Ok(z.iter().map(|v| (v - m).abs()).collect())
            }
            Self::HierUnsup { blocks, block_size, c } => HierarchicalUnsup { blocks, block_size, c }.apply(z),
            Self::HierProxy { blocks, block_size } => {
                if z.len() != blocks * block_size {
                    return Err(Error::DimensionMismatch { expected: blocks * block_size, got: z.len() });
                }
                Ok(flatten(&hierarchical_proxy_transform(&unflatten(z, block_size))?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::SymmetricGroup;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize) -> impl Fn(&mut dyn RngCore) -> Vec<f64> {
        move |rng: &mut dyn RngCore| (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect()
    }

    #[test]
    fn identity_passes_and_sort_fails() {
        let g = SymmetricGroup::new(4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let sampler = gaussian(4);
        let id = check_distributional_equivariance(&BuiltinMap::Identity, &g, &g, &sampler, 2000, &mut rng).unwrap();
        assert!(id.passed, "{id:?}");
        let sort = check_distributional_equivariance(&BuiltinMap::Sort, &g, &g, &sampler, 2000, &mut rng).unwrap();
        assert!(!sort.passed, "{sort:?}");
    }

    #[test]
    fn median_deviation_passes() {
        let g = SymmetricGroup::new(5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let r = check_distributional_equivariance(&BuiltinMap::MedianDeviation, &g, &g, &gaussian(5), 2000, &mut rng)
            .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn too_few_samples_rejected() {
        let g = SymmetricGroup::new(2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(check_distributional_equivariance(&BuiltinMap::Identity, &g, &g, &gaussian(2), 10, &mut rng).is_err());
    }

    #[test]
    fn names_round_trip() {
        for name in BuiltinMap::NAMES {
            assert!(BuiltinMap::from_name(name, 2, 2, 2.0).is_ok());
        }
        assert!(BuiltinMap::from_name("nope", 2, 2, 2.0).is_err());
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }
}
