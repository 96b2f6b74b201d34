use super::calibrator::map_candidates;
use super::quantile::{check_alpha, finite_quantile, keeps_unweighted, keeps_weighted, quantile_rank};
use super::set::{CandidateGrid, PredictionSet};
use crate::error::{Error, Result};
use crate::transforms::SupBranch;
use crate::LEVEL_EPS;

/// Weight `1/(K·N_k)` for every point of branch `k`, in flattened order.
pub fn randomsize_weights(sizes: &[usize]) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(Error::Empty("branches"));
    }
    if sizes.contains(&0) {
        return Err(Error::Empty("branch"));
    }
    let k = sizes.len() as f64;
    Ok(sizes.iter().flat_map(|&n| std::iter::repeat_n(1.0 / (k * n as f64), n)).collect())
}

fn equal_sizes(zt: &[Vec<f64>]) -> bool {
    zt.iter().all(|b| b.len() == zt[0].len())
}

/// Quantile of the law placing mass `1/(K·N_k)` on each point of branch `k`.
pub fn randomsize_threshold(zt: &[Vec<f64>], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let sizes: Vec<usize> = zt.iter().map(Vec::len).collect();
    let weights = randomsize_weights(&sizes)?;
    let flat: Vec<f64> = zt.concat();
    if equal_sizes(zt) {
        finite_quantile(&flat, None, 1.0 - alpha)
    } else {
        finite_quantile(&flat, Some(&weights), 1.0 - alpha)
    }
}

/// Whether the last entry of the last branch of `z̃` is at most
/// [`randomsize_threshold`].
pub fn randomsize_keep(zt: &[Vec<f64>], alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    let sizes: Vec<usize> = zt.iter().map(Vec::len).collect();
    let weights = randomsize_weights(&sizes)?;
    let flat: Vec<f64> = zt.concat();
    let own = flat[flat.len() - 1];
    Ok(if equal_sizes(zt) {
        keeps_unweighted(&flat, own, 1.0 - alpha)
    } else {
        keeps_weighted(&flat, &weights, own, 1.0 - alpha)
    })
}

/// True when the point carrying mass `own` is kept whatever its value.
pub(crate) fn weighted_always_keeps(own: f64, level: f64) -> bool {
    1.0 - own + 1e-9 < level - LEVEL_EPS
}

pub(crate) fn randomsize_unbounded(sizes: &[usize], alpha: f64) -> bool {
    let level = 1.0 - alpha;
    if sizes.iter().all(|&n| n == sizes[0]) {
        let m: usize = sizes.iter().sum();
        quantile_rank(level, m) >= m
    } else {
        weighted_always_keeps(1.0 / (sizes.len() as f64 * sizes[sizes.len() - 1] as f64), level)
    }
}

/// Set for the next entry of the last branch when branch sizes differ.
/// `observed` holds every branch, the last one without its target.
pub fn symmpi_set_randomsize<V>(observed: &[Vec<f64>], grid: &CandidateGrid, transform: V, alpha: f64) -> Result<PredictionSet>
where
    V: Fn(&[Vec<f64>]) -> Result<Vec<Vec<f64>>> + Sync,
{
    check_alpha(alpha)?;
    if observed.is_empty() {
        return Err(Error::Empty("branches"));
    }
    let k = observed.len();
    let member = map_candidates(grid.points(), |y| {
        let mut z = observed.to_vec();
        z[k - 1].push(y);
        randomsize_keep(&transform(&z)?, alpha)
    })?;
    let mut sizes: Vec<usize> = observed.iter().map(Vec::len).collect();
    sizes[k - 1] += 1;
    if sizes.contains(&0) {
        return Err(Error::Empty("branch"));
    }
    PredictionSet::new(grid, member, randomsize_unbounded(&sizes, alpha))
}

/// Scores `|z - z̄|` for `K - 1` complete branches plus a new branch holding
/// only `y`, where `z̄` averages the `K` branch means. Returns
/// `(values, weights)` with the candidate last.
fn hcp_scores(observed: &[Vec<f64>], y: f64) -> (Vec<f64>, Vec<f64>) {
    let k = observed.len() + 1;
    let means: f64 = observed.iter().map(|b| b.iter().sum::<f64>() / b.len() as f64).sum::<f64>() + y;
    let center = means / k as f64;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for b in observed {
        let w = 1.0 / (k as f64 * b.len() as f64);
        for &v in b {
            values.push((v - center).abs());
            weights.push(w);
        }
    }
    values.push((y - center).abs());
    weights.push(1.0 / k as f64);
    (values, weights)
}

/// Membership of `y` as the first observation of a new branch.
pub fn hcp_first_obs_keep(observed: &[Vec<f64>], y: f64, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    if observed.iter().any(Vec::is_empty) {
        return Err(Error::Empty("branch"));
    }
    let (values, weights) = hcp_scores(observed, y);
    let own = values[values.len() - 1];
    Ok(keeps_weighted(&values, &weights, own, 1.0 - alpha))
}

/// Hierarchical conformal set for the first observation of a new branch.
pub fn hcp_first_obs_set(observed: &[Vec<f64>], grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    if observed.iter().any(Vec::is_empty) {
        return Err(Error::Empty("branch"));
    }
    let member = map_candidates(grid.points(), |y| hcp_first_obs_keep(observed, y, alpha))?;
    let unbounded = weighted_always_keeps(1.0 / (observed.len() + 1) as f64, 1.0 - alpha);
    PredictionSet::new(grid, member, unbounded)
}

type RegRef<'a> = &'a (dyn Fn(&[f64]) -> f64 + Send + Sync);

/// Residuals `|y - μ̂(x)|` of `K - 1` calibration branches with mass
/// `1/(K·n_k)`.
fn hcp_sup_scores(calib: &[SupBranch], mu: RegRef<'_>) -> Result<(Vec<f64>, Vec<f64>)> {
    if calib.iter().any(SupBranch::is_empty) {
        return Err(Error::Empty("branch"));
    }
    let k = calib.len() + 1;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for b in calib {
        let w = 1.0 / (k as f64 * b.len() as f64);
        for (x, y) in b.x.iter().zip(&b.y) {
            values.push((y - mu(x)).abs());
            weights.push(w);
        }
    }
    Ok((values, weights))
}

/// Supervised counterpart of [`hcp_first_obs_keep`]: the candidate response
/// at `x_star` carries mass `1/K`. Its own mass never counts as strictly
/// below itself, so only the calibration residuals enter the tally.
pub fn hcp_first_obs_sup_keep(calib: &[SupBranch], x_star: &[f64], mu: RegRef<'_>, y: f64, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    let (values, weights) = hcp_sup_scores(calib, mu)?;
    Ok(keeps_weighted(&values, &weights, (y - mu(x_star)).abs(), 1.0 - alpha))
}

/// Supervised hierarchical conformal set for a new branch's first response
/// at `x_star`.
pub fn hcp_first_obs_sup_set(
    calib: &[SupBranch],
    x_star: &[f64],
    mu: RegRef<'_>,
    grid: &CandidateGrid,
    alpha: f64,
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    let (values, weights) = hcp_sup_scores(calib, mu)?;
    let prediction = mu(x_star);
    let member = map_candidates(grid.points(), |y| Ok(keeps_weighted(&values, &weights, (y - prediction).abs(), 1.0 - alpha)))?;
    let unbounded = weighted_always_keeps(1.0 / (calib.len() + 1) as f64, 1.0 - alpha);
    PredictionSet::new(grid, member, unbounded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{symmpi_set, Calibrator};
    use crate::groups::BlockPermutationGroup;
    use crate::transforms::{flatten, hierarchical_unsup_transform, unflatten};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn weights_arithmetic() {
        assert_eq!(randomsize_weights(&[1, 3]).unwrap(), vec![0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]);
        assert!(randomsize_weights(&[2, 0]).is_err());
    }

    #[test]
    fn hand_cumulative() {
        let zt = vec![vec![10.0], vec![1.0, 2.0, 3.0]];
        assert_eq!(randomsize_threshold(&zt, 0.4).unwrap(), 10.0);
    }

    #[test]
    fn equal_sizes_reduce_to_unweighted() {
        let zt = vec![vec![0.5, 2.0], vec![1.5, -1.0], vec![3.0, 0.0]];
        for alpha in [0.05, 0.2, 0.5, 0.9] {
            assert_eq!(randomsize_threshold(&zt, alpha).unwrap(), finite_quantile(&zt.concat(), None, 1.0 - alpha).unwrap());
        }
    }

    #[test]
    fn equal_sizes_match_block_cosets() {
        let g = BlockPermutationGroup::new(3, 2).unwrap();
        let cal = Calibrator::cosets(&g, g.last_entry_cosets()).unwrap();
        let grid = CandidateGrid::uniform(-4.0, 6.0, 201).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let obs = vec![
                vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                vec![rng.random_range(1.0..3.0), rng.random_range(1.0..3.0)],
                vec![rng.random_range(-1.0..1.0)],
            ];
            for alpha in [0.1, 0.3, 0.5] {
                let a = symmpi_set_randomsize(&obs, &grid, |z| hierarchical_unsup_transform(z, 2.0), alpha).unwrap();
                let embed = |y: f64| {
                    let mut z = obs.clone();
                    z[2].push(y);
                    flatten(&z)
                };
                let v = |z: &Vec<f64>| Ok(flatten(&hierarchical_unsup_transform(&unflatten(z, 2), 2.0)?));
                let b = symmpi_set(&grid, embed, v, |z: &Vec<f64>| z[5], &cal, alpha).unwrap();
                assert_eq!(a.member, b.member);
            }
        }
    }

    #[test]
    fn single_branch_is_within_branch_conformal() {
        let obs = vec![vec![1.0, 2.0, 3.0]];
        let grid = CandidateGrid::uniform(0.0, 5.0, 51).unwrap();
        let set = symmpi_set_randomsize(&obs, &grid, |z| Ok(z.to_vec()), 0.25).unwrap();
        for (y, m) in set.candidates.iter().zip(&set.member) {
            assert_eq!(*m, *y <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn hcp_two_branches() {
        let grid = CandidateGrid::uniform(-5.0, 5.0, 11).unwrap();
        let set = hcp_first_obs_set(&[vec![1.0]], &grid, 0.4).unwrap();
        assert_eq!(set.count(), 11);
        for y in grid.points() {
            let (v, w) = hcp_scores(&[vec![1.0]], *y);
            assert_eq!(w, vec![0.5, 0.5]);
            assert!(v[1] <= v[0].max(v[1]));
        }
        let equal = hcp_first_obs_set(&[vec![2.0, 2.0], vec![2.0]], &CandidateGrid::from_points(vec![2.0], 1.0).unwrap(), 0.1).unwrap();
        assert_eq!(equal.count(), 1);
    }

    #[test]
    fn hcp_matches_brute_force_quantile() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..200 {
            let obs: Vec<Vec<f64>> = (0..rng.random_range(1..5))
                .map(|_| (0..rng.random_range(1..4)).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let y = rng.random_range(-6.0..6.0);
            let alpha = rng.random_range(0.01..0.6);
            let (v, w) = hcp_scores(&obs, y);
            let q = finite_quantile(&v, Some(&w), 1.0 - alpha).unwrap();
            assert_eq!(hcp_first_obs_keep(&obs, y, alpha).unwrap(), v[v.len() - 1] <= q);
        }
    }
}
