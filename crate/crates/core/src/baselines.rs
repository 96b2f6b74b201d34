//! Comparison methods for hierarchical data: conformal prediction within the
//! target branch, split conformal prediction pooling every branch, and
//! conformal prediction on one draw per branch.

use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::calibrate::{check_alpha, count_centered, map_candidates, quantile_rank, CandidateGrid, PredictionSet};
use crate::error::{Error, Result};
use crate::transforms::{RegressorBundle, SupBranch};
use crate::LEVEL_EPS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    SingleTree,
    SplitConformal,
    Subsampling,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [Self::SingleTree, Self::SplitConformal, Self::Subsampling];
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SingleTree => "SingleTree",
            Self::SplitConformal => "Conformal",
            Self::Subsampling => "Subsampling",
        })
    }
}

#[derive(Clone, Debug)]
enum Scores {
    /// `|v - mean(pool ∪ {y})|` over the pool and the candidate.
    Centered { sorted: Vec<f64>, sum: f64 },
    /// Fixed residual magnitudes and the prediction at the target covariate.
    Residual { sorted: Vec<f64>, prediction: f64 },
}

/// Calibration scores for one baseline, prepared once and queried per
/// candidate. Every method is split conformal over `n` calibration scores
/// plus the candidate's own.
#[derive(Clone, Debug)]
pub struct ConformalBaseline {
    scores: Scores,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn nonempty<T>(v: &[T], what: &'static str) -> Result<()> {
    if v.is_empty() {
        Err(Error::Empty(what))
    } else {
        Ok(())
    }
}

fn residuals<'a>(b: &'a SupBranch, mu: &'a (dyn Fn(&[f64]) -> f64 + Send + Sync)) -> impl Iterator<Item = f64> + 'a {
    b.x.iter().zip(&b.y).map(move |(x, y)| (y - mu(x)).abs())
}

impl ConformalBaseline {
    fn centered(pool: Vec<f64>) -> Self {
        let sum = pool.iter().sum();
        Self { scores: Scores::Centered { sorted: sorted(pool), sum } }
    }

    /// Observed points of the target branch, centered at their mean with
    /// the candidate included.
    pub fn single_tree(last_branch: &[f64]) -> Self {
        Self::centered(last_branch.to_vec())
    }

    /// Residuals `|y - μ̂_K(x)|` of the target branch's calibration points.
    pub fn single_tree_sup(last_branch: &SupBranch, x_star: &[f64], reg: &RegressorBundle) -> Result<Self> {
        let k = reg.branch_mu.len().checked_sub(1).ok_or(Error::Empty("regressors"))?;
        let mu = &reg.branch_mu[k];
        Ok(Self { scores: Scores::Residual { sorted: sorted(residuals(last_branch, &**mu).collect()), prediction: mu(x_star) } })
    }

    /// Every observed point, centered at the pooled average with the
    /// candidate included.
    pub fn split(observed: &[Vec<f64>]) -> Result<Self> {
        nonempty(observed, "branches")?;
        Ok(Self::centered(observed.concat()))
    }

    /// Pooled residuals `|y - μ̂(x)|` over every calibration point.
    pub fn split_sup(calib: &[SupBranch], x_star: &[f64], reg: &RegressorBundle) -> Result<Self> {
        nonempty(calib, "branches")?;
        let mu = &reg.pooled_mu;
        let pool = calib.iter().flat_map(|b| residuals(b, &**mu)).collect();
        Ok(Self { scores: Scores::Residual { sorted: sorted(pool), prediction: mu(x_star) } })
    }

    /// One uniform draw from each branch except the last (target) branch.
    pub fn subsample(observed: &[Vec<f64>], rng: &mut dyn RngCore) -> Result<Self> {
        if observed.len() < 2 {
            return Err(crate::error::invalid("subsampling needs at least two branches"));
        }
        let others = &observed[..observed.len() - 1];
        if others.iter().any(Vec::is_empty) {
            return Err(Error::Empty("hierarchical branch"));
        }
        Ok(Self::centered(others.iter().map(|b| b[rng.random_range(0..b.len())]).collect()))
    }

    pub fn subsample_sup(calib: &[SupBranch], x_star: &[f64], reg: &RegressorBundle, rng: &mut dyn RngCore) -> Result<Self> {
        if calib.len() < 2 {
            return Err(crate::error::invalid("subsampling needs at least two branches"));
        }
        let others = &calib[..calib.len() - 1];
        if others.iter().any(SupBranch::is_empty) {
            return Err(Error::Empty("hierarchical branch"));
        }
        let mu = &reg.pooled_mu;
        let pool = others
            .iter()
            .map(|b| {
                let i = rng.random_range(0..b.len());
                (b.y[i] - mu(&b.x[i])).abs()
            })
            .collect();
        Ok(Self { scores: Scores::Residual { sorted: sorted(pool), prediction: mu(x_star) } })
    }

    /// Number of calibration scores, the candidate excluded.
    pub fn calibration_size(&self) -> usize {
        match &self.scores {
            Scores::Centered { sorted, .. } | Scores::Residual { sorted, .. } => sorted.len(),
        }
    }

    pub fn keep(&self, y: f64, alpha: f64) -> bool {
        let m = self.calibration_size() + 1;
        let below = match &self.scores {
            Scores::Centered { sorted, sum } => {
                let center = (sum + y) / m as f64;
                let psi = (y - center).abs();
                let split = sorted.partition_point(|&v| v < center);
                let (left, right) = sorted.split_at(split);
                let far = left.partition_point(|&v| (v - center).abs() >= psi);
                (left.len() - far) + right.partition_point(|&v| (v - center).abs() < psi)
            }
            Scores::Residual { sorted, prediction } => {
                let psi = (y - prediction).abs();
                sorted.partition_point(|&v| v < psi)
            }
        };
        below < quantile_rank(1.0 - alpha, m)
    }

    /// True when the quantile rank exceeds the number of calibration scores.
    pub fn unbounded(&self, alpha: f64) -> bool {
        let m = self.calibration_size() + 1;
        quantile_rank(1.0 - alpha, m) >= m
    }

    pub fn set(&self, grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
        check_alpha(alpha)?;
        let member = map_candidates(grid.points(), |y| Ok(self.keep(y, alpha)))?;
        PredictionSet::new(grid, member, self.unbounded(alpha))
    }
}

#[derive(Clone, Debug)]
enum HcpScores {
    /// Sorted branch values and the sum of branch means; the center is the
    /// mean of branch means with the candidate as one more branch.
    Centered { sorted: Vec<Vec<f64>>, mean_sum: f64 },
    /// Sorted residual magnitudes per branch and the prediction at `x*`.
    Residual { sorted: Vec<Vec<f64>>, prediction: f64 },
}

/// Hierarchical conformal baseline with a plug-in quantile: the weighted
/// `1 - α` quantile of the calibration branches' scores, each branch
/// carrying equal total mass, without the extra mass on the candidate used
/// by [`crate::calibrate::hcp_first_obs_set`]. The target branch's own
/// points are not used.
#[derive(Clone, Debug)]
pub struct PluginHcp {
    scores: HcpScores,
}

fn sorted_branches(branches: impl Iterator<Item = Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let out: Vec<Vec<f64>> = branches.map(sorted).collect();
    nonempty(&out, "branches")?;
    if out.iter().any(Vec::is_empty) {
        return Err(Error::Empty("hierarchical branch"));
    }
    Ok(out)
}

impl PluginHcp {
    /// `others` are the complete non-target branches.
    pub fn unsup(others: &[Vec<f64>]) -> Result<Self> {
        let sorted = sorted_branches(others.iter().cloned())?;
        let mean_sum = sorted.iter().map(|b| b.iter().sum::<f64>() / b.len() as f64).sum();
        Ok(Self { scores: HcpScores::Centered { sorted, mean_sum } })
    }

    /// Pooled residuals `|y - μ̂(x)|` of the non-target calibration branches.
    pub fn sup(others: &[SupBranch], x_star: &[f64], reg: &RegressorBundle) -> Result<Self> {
        let mu = &reg.pooled_mu;
        let sorted = sorted_branches(others.iter().map(|b| residuals(b, &**mu).collect()))?;
        Ok(Self { scores: HcpScores::Residual { sorted, prediction: mu(x_star) } })
    }

    pub fn keep(&self, y: f64, alpha: f64) -> bool {
        let level = 1.0 - alpha;
        // Per-branch fractions keep the full-mass sum exact.
        let (sorted, below): (&Vec<Vec<f64>>, f64) = match &self.scores {
            HcpScores::Centered { sorted, mean_sum } => {
                let center = (mean_sum + y) / (sorted.len() + 1) as f64;
                let own = (y - center).abs();
                (sorted, sorted.iter().map(|b| count_centered(b, center, 1.0, own) as f64 / b.len() as f64).sum())
            }
            HcpScores::Residual { sorted, prediction } => {
                let own = (y - prediction).abs();
                (sorted, sorted.iter().map(|b| b.partition_point(|&v| v < own) as f64 / b.len() as f64).sum())
            }
        };
        below / (sorted.len() as f64) < level - LEVEL_EPS
    }

    pub fn set(&self, grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
        check_alpha(alpha)?;
        let member = map_candidates(grid.points(), |y| Ok(self.keep(y, alpha)))?;
        PredictionSet::new(grid, member, false)
    }
}

/// Conformal set from the target branch alone.
pub fn single_tree_set(last_branch: &[f64], grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
    ConformalBaseline::single_tree(last_branch).set(grid, alpha)
}

/// Split conformal set pooling all branches.
pub fn split_conformal_set(observed: &[Vec<f64>], grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
    ConformalBaseline::split(observed)?.set(grid, alpha)
}

/// Conformal set on one draw from each non-target branch.
pub fn subsampling_set(
    observed: &[Vec<f64>],
    grid: &CandidateGrid,
    alpha: f64,
    rng: &mut dyn RngCore,
) -> Result<PredictionSet> {
    ConformalBaseline::subsample(observed, rng)?.set(grid, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::finite_quantile;
    use crate::transforms::fit_regressors;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn brute_centered(pool: &[f64], y: f64, alpha: f64) -> bool {
        let mut all = pool.to_vec();
        all.push(y);
        let center = all.iter().sum::<f64>() / all.len() as f64;
        let scores: Vec<f64> = all.iter().map(|v| (v - center).abs()).collect();
        let q = finite_quantile(&scores, None, 1.0 - alpha).unwrap();
        scores[scores.len() - 1] <= q
    }

    #[test]
    fn centered_matches_brute_force() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..300 {
            let pool: Vec<f64> = (0..rng.random_range(1..20)).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b = ConformalBaseline::single_tree(&pool);
            let alpha = rng.random_range(0.0..1.0);
            let y = rng.random_range(-6.0..6.0);
            assert_eq!(b.keep(y, alpha), brute_centered(&pool, y, alpha));
        }
    }

    #[test]
    fn single_tree_unbounded_at_small_alpha() {
        let grid = CandidateGrid::uniform(-3.0, 3.0, 61).unwrap();
        let branch = vec![0.1; 14];
        assert!(single_tree_set(&branch, &grid, 0.05).unwrap().unbounded);
        assert!(!single_tree_set(&branch, &grid, 0.15).unwrap().unbounded);
        assert!(single_tree_set(&branch, &grid, 0.0).unwrap().unbounded);
    }

    #[test]
    fn single_tree_ignores_other_branches() {
        let grid = CandidateGrid::uniform(-3.0, 3.0, 61).unwrap();
        let last = vec![0.3, -0.2, 1.1, 0.4, 0.0, -0.7];
        let a = single_tree_set(&last, &grid, 0.3).unwrap();
        let b = ConformalBaseline::single_tree(&last).set(&grid, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_data_gives_zero_length() {
        let obs = vec![vec![2.0; 5]; 3];
        let grid = CandidateGrid::around(&obs.concat(), 2001, 4.0).unwrap();
        let set = split_conformal_set(&obs, &grid, 0.1).unwrap();
        assert_eq!(set.count(), 1);
        assert_eq!(set.length(), 0.0);
        assert_eq!(set.intervals(), vec![(2.0, 2.0)]);
    }

    #[test]
    fn two_point_subsampling() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let obs = vec![vec![1.0, 5.0], vec![0.0]];
        let b = ConformalBaseline::subsample(&obs, &mut rng).unwrap();
        assert_eq!(b.calibration_size(), 1);
        for y in [-4.0, 0.0, 3.0, 8.0] {
            assert!(b.keep(y, 0.4));
        }
        assert!(ConformalBaseline::subsample(&obs[..1], &mut rng).is_err());
    }

    #[test]
    fn supervised_residuals() {
        let train: Vec<SupBranch> = (0..3)
            .map(|k| SupBranch { x: (0..6).map(|i| vec![i as f64]).collect(), y: (0..6).map(|i| k as f64 + i as f64 + 0.1 * (i % 2) as f64).collect() })
            .collect();
        let reg = fit_regressors(&train).unwrap();
        let calib = train.clone();
        let st = ConformalBaseline::single_tree_sup(&calib[2], &[2.5], &reg).unwrap();
        let split = ConformalBaseline::split_sup(&calib, &[2.5], &reg).unwrap();
        assert_eq!(st.calibration_size(), 6);
        assert_eq!(split.calibration_size(), 18);
        let pred = (reg.branch_mu[2])(&[2.5]);
        assert!(st.keep(pred, 0.2));
        assert!(!st.keep(pred + 100.0, 0.2));
    }

    #[test]
    fn plugin_hcp_matches_weighted_quantile() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..200 {
            let others: Vec<Vec<f64>> = (0..rng.random_range(1..5))
                .map(|_| (0..rng.random_range(1..6)).map(|_| rng.random_range(-3..4) as f64 * 0.5).collect())
                .collect();
            let alpha = rng.random_range(0.05..0.95);
            let y = rng.random_range(-8..9) as f64 * 0.25;
            let k = others.len();
            let center = (others.iter().map(|b| b.iter().sum::<f64>() / b.len() as f64).sum::<f64>() + y) / (k + 1) as f64;
            let (mut v, mut w) = (Vec::new(), Vec::new());
            for b in &others {
                for z in b {
                    v.push((z - center).abs());
                    w.push(1.0 / (k * b.len()) as f64);
                }
            }
            let q = finite_quantile(&v, Some(&w), 1.0 - alpha).unwrap();
            let own = (y - center).abs();
            // Skip instances where floating sums sit on the level itself.
            let below: f64 = v.iter().zip(&w).filter(|(s, _)| **s < own).map(|(_, w)| w).sum();
            if (below - (1.0 - alpha)).abs() < 1e-9 {
                continue;
            }
            assert_eq!(PluginHcp::unsup(&others).unwrap().keep(y, alpha), own <= q, "{others:?} y={y} a={alpha}");
        }
    }

    #[test]
    fn plugin_hcp_full_level_is_bounded_by_max() {
        let others = vec![vec![0.0, 1.0], vec![2.0]];
        let h = PluginHcp::unsup(&others).unwrap();
        let grid = CandidateGrid::uniform(-20.0, 20.0, 401).unwrap();
        let set = h.set(&grid, 0.0).unwrap();
        assert!(!set.unbounded);
        assert!(set.count() < 401);
    }
}
