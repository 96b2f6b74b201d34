use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::calibrate::{check_alpha, map_candidates, quantile_rank, CandidateGrid, PredictionSet};
use crate::error::{invalid, Error, Result};
use crate::groups::sample_haar_orthogonal;

/// Region `{z : -|z_1| ≤ Q_{1-α}}` for a new point of a jointly
/// rotation-invariant, exchangeable sample, with the quantile taken over
/// `-|(O z_{π⁻¹(n+1)})_1|` for `M` Monte Carlo draws of `(π, O)` plus the
/// point itself. `(O v)_1` is drawn as `Wᵀv / ‖W‖` with `W ~ N(0, I_p)`.
#[derive(Clone, Debug, Serialize)]
pub struct RotationRegion {
    alpha: f64,
    /// Values from draws that picked an observed point, sorted.
    fixed: Vec<f64>,
    /// Unit directions `W / ‖W‖` from draws that picked the new point.
    self_directions: Vec<Vec<f64>>,
    draws: usize,
    dim: usize,
}

fn unit_direction(p: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return w.into_iter().map(|v| v / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rotation_region(observed: &[Vec<f64>], alpha: f64, mc: usize, rng: &mut dyn RngCore) -> Result<RotationRegion> {
    check_alpha(alpha)?;
    if observed.is_empty() {
        return Err(Error::Empty("observed points"));
    }
    if mc == 0 {
        return Err(invalid("Monte Carlo calibration needs at least one draw"));
    }
    let p = observed[0].len();
    if p < 2 {
        return Err(invalid(format!("rotational regions need dimension ≥ 2, got {p}")));
    }
    if let Some(z) = observed.iter().find(|z| z.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, got: z.len() });
    }
    let n = observed.len();
    let mut fixed = Vec::new();
    let mut self_directions = Vec::new();
    for _ in 0..mc {
        let j = rng.random_range(0..=n);
        let u = unit_direction(p, rng);
        if j == n {
            self_directions.push(u);
        } else {
            fixed.push(-dot(&u, &observed[j]).abs());
        }
    }
    fixed.sort_by(f64::total_cmp);
    Ok(RotationRegion { alpha, fixed, self_directions, draws: mc, dim: p })
}

impl RotationRegion {
    fn rank(&self) -> usize {
        quantile_rank(1.0 - self.alpha, self.draws + 1)
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        let own = -z[0].abs();
        let below = self.fixed.partition_point(|&v| v < own)
            + self.self_directions.iter().filter(|u| -dot(u, z).abs() < own).count();
        below < self.rank()
    }

    /// Half-width `C` of the excluded strip on the first axis: a point
    /// `(s, 0, …)` lies in the region exactly when `|s| ≥ C`.
    pub fn strip_halfwidth(&self) -> f64 {
        let q = self.rank();
        if q == 0 {
            f64::INFINITY
        } else if q > self.fixed.len() {
            0.0
        } else {
            (-self.fixed[q - 1]).max(0.0)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    /// Membership over the raster `xs × ys` for the first two coordinates,
    /// remaining coordinates zero. Rows follow `ys`.
    pub fn raster(&self, xs: &[f64], ys: &[f64]) -> Vec<Vec<bool>> {
        ys.iter()
            .map(|&y| {
                xs.iter()
                    .map(|&x| {
                        let mut z = vec![0.0; self.dim];
                        z[0] = x;
                        z[1] = y;
                        self.contains(&z)
                    })
                    .collect()
            })
            .collect()
    }

    /// The region restricted to the first axis.
    pub fn axis_set(&self, grid: &CandidateGrid) -> Result<PredictionSet> {
        let member = grid
            .points()
            .iter()
            .map(|&s| {
                let mut z = vec![0.0; self.dim];
                z[0] = s;
                self.contains(&z)
            })
            .collect();
        PredictionSet::new(grid, member, false)
    }
}

/// Set of responses `y` at `x_new` for rotation-invariant covariates: keep
/// `y` when `score(x_new, y)` is at most the Monte Carlo quantile of
/// `score(O x_j, y_j)` over draws of `(j, O)`, where `j` may pick the new
/// pair itself.
#[allow(clippy::too_many_arguments)]
pub fn rotation_supervised_set<S>(
    xs: &[Vec<f64>],
    ys: &[f64],
    x_new: &[f64],
    grid: &CandidateGrid,
    score: S,
    alpha: f64,
    mc: usize,
    rng: &mut dyn RngCore,
) -> Result<PredictionSet>
where
    S: Fn(&[f64], f64) -> f64 + Sync,
{
    check_alpha(alpha)?;
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if mc == 0 {
        return Err(invalid("Monte Carlo calibration needs at least one draw"));
    }
    let p = x_new.len();
    if let Some(x) = xs.iter().find(|x| x.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, got: x.len() });
    }
    let n = xs.len();
    let mut fixed = Vec::new();
    let mut rotated_new = Vec::new();
    for _ in 0..mc {
        let j = rng.random_range(0..=n);
        let o = sample_haar_orthogonal(p, rng)?;
        if j == n {
            rotated_new.push(o.apply(x_new));
        } else {
            fixed.push(score(&o.apply(&xs[j]), ys[j]));
        }
    }
    fixed.sort_by(f64::total_cmp);
    let q = quantile_rank(1.0 - alpha, mc + 1);
    let member = map_candidates(grid.points(), |y| {
        let own = score(x_new, y);
        let below = fixed.partition_point(|&v| v < own) + rotated_new.iter().filter(|x| score(x, y) < own).count();
        Ok(below < q)
    })?;
    PredictionSet::new(grid, member, q > mc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gen_rotational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use statrs::distribution::{Beta, ContinuousCDF};

    #[test]
    fn rejects_bad_input() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(rotation_region(&[vec![1.0]], 0.1, 10, &mut rng).is_err());
        assert!(rotation_region(&[], 0.1, 10, &mut rng).is_err());
        assert!(rotation_region(&[vec![1.0, 0.0]], 0.1, 0, &mut rng).is_err());
    }

    #[test]
    fn strip_widens_with_alpha() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let obs = gen_rotational(12, 2, 30.0, &mut rng).unwrap();
        let widths: Vec<f64> = [0.001, 0.05, 0.5, 0.999]
            .iter()
            .map(|&a| {
                let mut r = ChaCha20Rng::seed_from_u64(11);
                rotation_region(&obs, a, 999, &mut r).unwrap().strip_halfwidth()
            })
            .collect();
        assert!(widths.windows(2).all(|w| w[0] <= w[1]), "{widths:?}");
        assert!(widths[0] < 0.5);
        // Near α = 1 only points beyond every projection survive.
        let max_radius = obs.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        assert!(widths[3] <= max_radius && widths[3] > widths[1]);
    }

    #[test]
    fn axis_membership_is_a_strip_complement() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let obs = gen_rotational(12, 2, 30.0, &mut rng).unwrap();
        let r = rotation_region(&obs, 0.05, 500, &mut rng).unwrap();
        let c = r.strip_halfwidth();
        let grid = CandidateGrid::uniform(-20.0, 20.0, 401).unwrap();
        let set = r.axis_set(&grid).unwrap();
        for (s, m) in set.candidates.iter().zip(&set.member) {
            assert_eq!(*m, s.abs() >= c, "s = {s}, C = {c}");
        }
    }

    #[test]
    fn projection_law_matches_beta() {
        // One observed point at radius r: every draw that picks it gives
        // r |U_1|, and U_1² ~ Beta(1/2, (p-1)/2).
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (r, p) = (3.0, 3);
        let mut z = vec![0.0; p];
        z[0] = r;
        let region = rotation_region(&[z], 0.5, 20_000, &mut rng).unwrap();
        let beta = Beta::new(0.5, (p as f64 - 1.0) / 2.0).unwrap();
        let vals: Vec<f64> = region.fixed.iter().map(|v| (v / r).powi(2)).collect();
        let n = vals.len() as f64;
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        let ks = sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = beta.cdf(v);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / n.sqrt(), "KS {ks}");
    }

    #[test]
    fn marginal_coverage() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let trials = 2000;
        let mut hits = 0;
        for _ in 0..trials {
            let pts = gen_rotational(13, 2, 30.0, &mut rng).unwrap();
            let region = rotation_region(&pts[..12], 0.1, 199, &mut rng).unwrap();
            hits += usize::from(region.contains(&pts[12]));
        }
        let cov = hits as f64 / trials as f64;
        let se = (0.09f64 / trials as f64).sqrt();
        assert!(cov > 0.9 - 3.0 * se, "coverage {cov}");
    }

    #[test]
    fn invariant_predictor_reduces_to_conformal() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let xs = gen_rotational(30, 2, 1.0, &mut rng).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>() + 0.1 * rng.random::<f64>()).collect();
        let mu = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let score = |x: &[f64], y: f64| (y - mu(x)).abs();
        let grid = CandidateGrid::uniform(-1.0, 3.0, 81).unwrap();
        let x_new = vec![0.5, -0.5];
        let set = rotation_supervised_set(&xs, &ys, &x_new, &grid, score, 0.2, 2000, &mut rng).unwrap();
        // Scores do not move under rotation, so the set is an interval
        // around μ̂(x_new).
        assert_eq!(set.intervals().len(), 1);
        assert!(set.covers(mu(&x_new)));
    }

    #[test]
    fn uniform_classifier_keeps_all_labels() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let xs = gen_rotational(20, 2, 1.0, &mut rng).unwrap();
        let ys: Vec<f64> = (0..20).map(|i| (i % 3) as f64).collect();
        let grid = CandidateGrid::from_points(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let set = rotation_supervised_set(&xs, &ys, &[0.1, 0.2], &grid, |_, _| -1.0 / 3.0, 0.1, 200, &mut rng).unwrap();
        assert_eq!(set.count(), 3);
    }

    #[test]
    fn radial_classifier_coverage() {
        // Label by radius band with 20% label noise; p̂ uses only ‖x‖.
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let label = |r: f64| if r < 0.8 { 0 } else if r < 1.5 { 1 } else { 2 };
        let p_hat = |x: &[f64], y: f64| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if label(r) as f64 == y { 0.8 } else { 0.1 }
        };
        let draw = |rng: &mut ChaCha20Rng| {
            let x: Vec<f64> = gen_rotational(1, 2, 1.0, rng).unwrap().remove(0);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y = if rng.random::<f64>() < 0.8 { label(r) } else { (label(r) + rng.random_range(1..3)) % 3 };
            (x, y as f64)
        };
        let grid = CandidateGrid::from_points(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let trials = 1000;
        let mut hits = 0;
        for _ in 0..trials {
            let data: Vec<(Vec<f64>, f64)> = (0..25).map(|_| draw(&mut rng)).collect();
            let (xs, ys): (Vec<_>, Vec<_>) = data[..24].iter().cloned().unzip();
            let (x_new, y_new) = data[24].clone();
            let set = rotation_supervised_set(&xs, &ys, &x_new, &grid, |x, y| -p_hat(x, y), 0.1, 99, &mut rng).unwrap();
            hits += usize::from(set.member[y_new as usize]);
        }
        let cov = hits as f64 / trials as f64;
        assert!(cov >= 0.9 - 3.0 * (0.09f64 / trials as f64).sqrt(), "coverage {cov}");
    }
}
