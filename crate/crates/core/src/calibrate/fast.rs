//! Per-candidate membership for the last entry of the last branch in
//! `O(K log M + M)` time. Branches other than the last are sorted once; only
//! the last branch is rebuilt for each candidate. The arithmetic mirrors the
//! hierarchical transforms step for step, so decisions agree bit for bit
//! with running the full transform and counting.

use super::calibrator::map_candidates;
use super::quantile::{check_alpha, quantile_rank};
use super::randomsize::randomsize_unbounded;
use super::set::{CandidateGrid, PredictionSet};
use crate::error::{Error, Result};
use crate::transforms::{
    branch_mean, choose_center, grand_mean, leaf_residual, sup_leaf, RegressorBundle, Scale, SupBranch,
};
use crate::LEVEL_EPS;

/// How many `v` in `sorted` have `|v - center| / scale < psi`.
pub(crate) fn count_centered(sorted: &[f64], center: f64, scale: f64, psi: f64) -> usize {
    let split = sorted.partition_point(|&z| z < center);
    let (left, right) = sorted.split_at(split);
    let f = |z: f64| (z - center).abs() / scale;
    let left_far = left.partition_point(|&z| f(z) >= psi);
    (left.len() - left_far) + right.partition_point(|&z| f(z) < psi)
}

/// Per-branch counts of values below `psi` turned into a decision, with
/// equal masses when every branch has the same size and masses
/// `1/(K·N_k)` otherwise.
#[derive(Clone, Debug)]
struct Tally {
    sizes: Vec<usize>,
    weights: Option<Vec<f64>>,
}

impl Tally {
    fn new(sizes: Vec<usize>) -> Self {
        let k = sizes.len() as f64;
        let equal = sizes.iter().all(|&n| n == sizes[0]);
        let weights = (!equal).then(|| sizes.iter().map(|&n| 1.0 / (k * n as f64)).collect());
        Self { sizes, weights }
    }

    fn keeps(&self, counts: impl Iterator<Item = usize>, level: f64) -> bool {
        match &self.weights {
            None => {
                let total: usize = self.sizes.iter().sum();
                counts.sum::<usize>() < quantile_rank(level, total)
            }
            Some(w) => {
                let mut below = 0.0;
                for (count, wk) in counts.zip(w) {
                    for _ in 0..count {
                        below += wk;
                    }
                }
                below < level - LEVEL_EPS
            }
        }
    }
}

/// Unsupervised adaptive transform with the candidate appended to the last
/// branch.
#[derive(Clone, Debug)]
pub struct UnsupLastEntry {
    c: f64,
    scale: Scale,
    sorted: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<(f64, f64)>,
    last_obs: Vec<f64>,
    tally: Tally,
}

impl UnsupLastEntry {
    /// `observed` holds all `K` branches, the last without its target.
    pub fn new(observed: &[Vec<f64>], c: f64) -> Result<Self> {
        Self::with_scale(observed, c, Scale::BranchSd)
    }

    pub fn with_scale(observed: &[Vec<f64>], c: f64, scale: Scale) -> Result<Self> {
        if c.is_nan() || c < 0.0 {
            return Err(crate::error::invalid(format!("interpolation constant must be non-negative, got {c}")));
        }
        let (last, rest) = observed.split_last().ok_or(Error::Empty("branches"))?;
        if rest.iter().any(Vec::is_empty) {
            return Err(Error::Empty("hierarchical branch"));
        }
        let means: Vec<f64> = rest.iter().map(|b| branch_mean(b)).collect();
        let scales = rest.iter().zip(&means).map(|(b, &m)| scale.unsup(b, m)).collect();
        let sorted = rest
            .iter()
            .map(|b| {
                let mut s = b.clone();
                s.sort_by(f64::total_cmp);
                s
            })
            .collect();
        let mut sizes: Vec<usize> = observed.iter().map(Vec::len).collect();
        sizes[rest.len()] += 1;
        Ok(Self { c, scale, sorted, means, scales, last_obs: last.clone(), tally: Tally::new(sizes) })
    }

    pub fn keep(&self, y: f64, alpha: f64) -> bool {
        let mut last = Vec::with_capacity(self.last_obs.len() + 1);
        last.extend_from_slice(&self.last_obs);
        last.push(y);
        let m = branch_mean(&last);
        let (t, s) = self.scale.unsup(&last, m);
        let mut means = Vec::with_capacity(self.means.len() + 1);
        means.extend_from_slice(&self.means);
        means.push(m);
        let grand = grand_mean(&means);
        let center = choose_center(m, t, last.len(), grand, self.c);
        let psi = (y - center).abs() / s;

        let counts = self
            .sorted
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let (tk, sk) = self.scales[k];
                let ck = choose_center(self.means[k], tk, b.len(), grand, self.c);
                count_centered(b, ck, sk, psi)
            })
            .chain(std::iter::once(last.iter().filter(|&&z| (z - center).abs() / s < psi).count()));
        self.tally.keeps(counts, 1.0 - alpha)
    }

    pub fn unbounded(&self, alpha: f64) -> bool {
        randomsize_unbounded(&self.tally.sizes, alpha)
    }

    pub fn set(&self, grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
        check_alpha(alpha)?;
        let member = map_candidates(grid.points(), |y| Ok(self.keep(y, alpha)))?;
        PredictionSet::new(grid, member, self.unbounded(alpha))
    }
}

/// Supervised adaptive residual transform for a new response at covariate
/// `x*` in the last branch. Scores of the other branches do not depend on
/// the candidate and are computed once.
#[derive(Clone, Debug)]
pub struct SupLastEntry {
    c: f64,
    scale: Scale,
    fixed: Vec<Vec<f64>>,
    last_features: Vec<[f64; 3]>,
    mu_k: f64,
    mu: f64,
    band: f64,
    tally: Tally,
}

impl SupLastEntry {
    /// `calib` holds all `K` calibration branches, the last without the
    /// target point at `x_star`.
    pub fn new(calib: &[SupBranch], x_star: &[f64], reg: &RegressorBundle, c: f64) -> Result<Self> {
        Self::with_scale(calib, x_star, reg, c, Scale::BranchSd)
    }

    pub fn with_scale(calib: &[SupBranch], x_star: &[f64], reg: &RegressorBundle, c: f64, scale: Scale) -> Result<Self> {
        if c.is_nan() || c < 0.0 {
            return Err(crate::error::invalid(format!("interpolation constant must be non-negative, got {c}")));
        }
        let kk = calib.len();
        if kk == 0 {
            return Err(Error::Empty("branches"));
        }
        if reg.branch_mu.len() != kk || reg.branch_band.len() != kk {
            return Err(Error::DimensionMismatch { expected: kk, got: reg.branch_mu.len() });
        }
        let mut fixed = Vec::with_capacity(kk - 1);
        for (k, b) in calib[..kk - 1].iter().enumerate() {
            if b.is_empty() {
                return Err(Error::Empty("hierarchical branch"));
            }
            let r: Vec<f64> = b
                .x
                .iter()
                .zip(&b.y)
                .map(|(x, &y)| sup_leaf(reg, k, x, y).map(|f| leaf_residual(f, c)))
                .collect::<Result<_>>()?;
            let eps = scale.sup(&r);
            let mut scores: Vec<f64> = r.iter().map(|v| v / eps).collect();
            scores.sort_by(f64::total_cmp);
            fixed.push(scores);
        }
        let last = &calib[kk - 1];
        let last_features =
            last.x.iter().zip(&last.y).map(|(x, &y)| sup_leaf(reg, kk - 1, x, y)).collect::<Result<Vec<_>>>()?;
        let probe = sup_leaf(reg, kk - 1, x_star, 0.0)?;
        let mut sizes: Vec<usize> = calib.iter().map(SupBranch::len).collect();
        sizes[kk - 1] += 1;
        Ok(Self {
            c,
            scale,
            fixed,
            last_features,
            mu_k: (reg.branch_mu[kk - 1])(x_star),
            mu: (reg.pooled_mu)(x_star),
            band: probe[2],
            tally: Tally::new(sizes),
        })
    }

    pub fn keep(&self, y: f64, alpha: f64) -> bool {
        let mut r: Vec<f64> = self.last_features.iter().map(|&f| leaf_residual(f, self.c)).collect();
        r.push(leaf_residual([y - self.mu_k, y - self.mu, self.band], self.c));
        let eps = self.scale.sup(&r);
        let psi = r[r.len() - 1] / eps;
        let counts = self
            .fixed
            .iter()
            .map(|b| b.partition_point(|&v| v < psi))
            .chain(std::iter::once(r.iter().filter(|&&v| v / eps < psi).count()));
        self.tally.keeps(counts, 1.0 - alpha)
    }

    pub fn unbounded(&self, alpha: f64) -> bool {
        randomsize_unbounded(&self.tally.sizes, alpha)
    }

    pub fn set(&self, grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
        check_alpha(alpha)?;
        let member = map_candidates(grid.points(), |y| Ok(self.keep(y, alpha)))?;
        PredictionSet::new(grid, member, self.unbounded(alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{randomsize_keep, symmpi_keep, Calibrator};
    use crate::groups::BlockPermutationGroup;
    use crate::transforms::{
        fit_regressors, flatten, hierarchical_sup_direct_with, hierarchical_sup_transform, hierarchical_unsup_transform,
        hierarchical_unsup_transform_with, unflatten,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn centered_count_matches_scan() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..500 {
            let mut v: Vec<f64> = (0..rng.random_range(1..12)).map(|_| rng.random_range(-3..4) as f64 * 0.5).collect();
            v.sort_by(f64::total_cmp);
            let center = rng.random_range(-4..5) as f64 * 0.25;
            let scale = rng.random_range(0.5..2.0);
            let psi = rng.random_range(0..6) as f64 * 0.5;
            let scan = v.iter().filter(|&&z| (z - center).abs() / scale < psi).count();
            assert_eq!(count_centered(&v, center, scale, psi), scan);
        }
    }

    #[test]
    fn unsup_fixed_size_matches_generic() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (kk, mm) = (4, 3);
        let g = BlockPermutationGroup::new(kk, mm).unwrap();
        let cal = Calibrator::cosets(&g, g.last_entry_cosets()).unwrap();
        for _ in 0..30 {
            let mut obs: Vec<Vec<f64>> =
                (0..kk).map(|k| (0..mm).map(|_| k as f64 * 2.0 + rng.random_range(-1.0..1.0)).collect()).collect();
            obs[kk - 1].pop();
            let c = [0.0, 1.0, 2.0, f64::INFINITY][rng.random_range(0..4)];
            let fast = UnsupLastEntry::new(&obs, c).unwrap();
            for alpha in [0.05, 0.2, 0.5] {
                for i in 0..80 {
                    let y = -3.0 + i as f64 * 0.15;
                    let mut z = obs.clone();
                    z[kk - 1].push(y);
                    let v = |p: &Vec<f64>| Ok(flatten(&hierarchical_unsup_transform(&unflatten(p, mm), c)?));
                    let slow = symmpi_keep(&flatten(&z), v, |p: &Vec<f64>| p[kk * mm - 1], &cal, alpha).unwrap();
                    assert_eq!(fast.keep(y, alpha), slow, "y={y} alpha={alpha} c={c}");
                }
            }
        }
    }

    #[test]
    fn unsup_ragged_matches_generic() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..30 {
            let obs: Vec<Vec<f64>> = (0..5)
                .map(|k| (0..rng.random_range(1..6)).map(|_| k as f64 + rng.random_range(-1.0..1.0)).collect())
                .collect();
            let fast = UnsupLastEntry::new(&obs, 2.0).unwrap();
            for alpha in [0.1, 0.3] {
                for i in 0..60 {
                    let y = -2.0 + i as f64 * 0.15;
                    let mut z = obs.clone();
                    z[4].push(y);
                    let slow = randomsize_keep(&hierarchical_unsup_transform(&z, 2.0).unwrap(), alpha).unwrap();
                    assert_eq!(fast.keep(y, alpha), slow);
                }
            }
        }
    }

    fn sup_branches(rng: &mut ChaCha20Rng, sizes: &[usize]) -> Vec<SupBranch> {
        sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let theta = k as f64 - 1.5;
                let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-0.5..0.5)]).collect();
                let y = x.iter().map(|r| theta * r[0] + rng.random_range(-0.5..0.5)).collect();
                SupBranch { x, y }
            })
            .collect()
    }

    #[test]
    fn sup_matches_generic() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for sizes in [[5, 5, 5, 5], [3, 6, 4, 5]] {
            for _ in 0..10 {
                let train = sup_branches(&mut rng, &[8, 8, 8, 8]);
                let reg = fit_regressors(&train).unwrap();
                let mut calib = sup_branches(&mut rng, &sizes);
                let x_star = calib[3].x.pop().unwrap();
                calib[3].y.pop();
                for c in [0.5, 2.0, f64::INFINITY] {
                    let fast = SupLastEntry::new(&calib, &x_star, &reg, c).unwrap();
                    for i in 0..60 {
                        let y = -3.0 + i as f64 * 0.1;
                        let mut full = calib.clone();
                        full[3].x.push(x_star.clone());
                        full[3].y.push(y);
                        let zt = hierarchical_sup_transform(&full, &reg, c).unwrap();
                        assert_eq!(fast.keep(y, 0.2), randomsize_keep(&zt, 0.2).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn raw_scale_matches_generic() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let obs: Vec<Vec<f64>> = (0..5)
                .map(|k| (0..rng.random_range(1..6)).map(|_| k as f64 * 0.3 + rng.random_range(-1.0..1.0)).collect())
                .collect();
            let fast = UnsupLastEntry::with_scale(&obs, 2.0, Scale::Raw).unwrap();
            for i in 0..60 {
                let y = -2.0 + i as f64 * 0.15;
                let mut z = obs.clone();
                z[4].push(y);
                let zt = hierarchical_unsup_transform_with(&z, 2.0, Scale::Raw).unwrap();
                assert_eq!(fast.keep(y, 0.2), randomsize_keep(&zt, 0.2).unwrap());
            }
        }
        for _ in 0..10 {
            let train = sup_branches(&mut rng, &[8, 8, 8, 8]);
            let reg = fit_regressors(&train).unwrap();
            let mut calib = sup_branches(&mut rng, &[4, 6, 5, 5]);
            let x_star = calib[3].x.pop().unwrap();
            calib[3].y.pop();
            let fast = SupLastEntry::with_scale(&calib, &x_star, &reg, 2.0, Scale::Raw).unwrap();
            for i in 0..60 {
                let y = -3.0 + i as f64 * 0.1;
                let mut full = calib.clone();
                full[3].x.push(x_star.clone());
                full[3].y.push(y);
                let zt = hierarchical_sup_direct_with(&full, &reg, 2.0, Scale::Raw).unwrap();
                assert_eq!(fast.keep(y, 0.2), randomsize_keep(&zt, 0.2).unwrap());
            }
        }
    }

    #[test]
    fn unbounded_follows_rank() {
        let obs = vec![vec![0.0; 15], vec![0.0; 14]];
        let fast = UnsupLastEntry::new(&obs, 2.0).unwrap();
        assert!(!fast.unbounded(0.05));
        let single = UnsupLastEntry::new(&[vec![1.0, 2.0]], 2.0).unwrap();
        assert!(single.unbounded(0.05));
        assert!(!single.unbounded(0.5));
    }
}
