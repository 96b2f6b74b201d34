use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::hierarchical::{leaf_residual, sup_leaf, SupBranch};
use super::SCALE_FLOOR;
use crate::error::{invalid, Error, Result};

/// A regression function of the covariate row.
pub type RegFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Fitted pooled and per-branch regressors with pointwise standard-error
/// bands. `residual_var[k]` is the training residual variance of branch
/// `k`'s fit.
#[derive(Clone)]
pub struct RegressorBundle {
    pub pooled_mu: RegFn,
    pub branch_mu: Vec<RegFn>,
    pub branch_band: Vec<RegFn>,
    pub residual_var: Vec<f64>,
}

impl fmt::Debug for RegressorBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegressorBundle")
            .field("branches", &self.branch_mu.len())
            .field("residual_var", &self.residual_var)
            .finish()
    }
}

/// Ordinary least squares with an intercept.
#[derive(Clone, Debug)]
pub struct LinearFit {
    /// Intercept first, then one slope per covariate.
    pub coef: DVector<f64>,
    xtx_inv: DMatrix<f64>,
    /// Residual variance `RSS / (n - p)`, zero when the fit is saturated.
    pub sigma2: f64,
    pub n: usize,
}

impl LinearFit {
    fn design_row(x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len() + 1, std::iter::once(1.0).chain(x.iter().copied()))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        Self::design_row(x).dot(&self.coef)
    }

    /// Standard error of the fitted mean at `x`.
    pub fn standard_error(&self, x: &[f64]) -> f64 {
        let r = Self::design_row(x);
        (self.sigma2 * (r.transpose() * &self.xtx_inv * &r)[(0, 0)]).max(0.0).sqrt()
    }
}

/// Least squares of `y` on `[1, x]`. Fails when the design has fewer rows
/// than columns or is numerically rank deficient.
pub fn fit_linear(x: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.is_empty() {
        return Err(Error::Empty("regression data"));
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: row.len() });
    }
    let (n, p) = (x.len(), d + 1);
    if n < p {
        return Err(Error::RankDeficient { branch: None, detail: format!("{n} rows for {p} coefficients") });
    }
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax.max(1.0)) {
        return Err(Error::RankDeficient {
            branch: None,
            detail: format!("singular values span [{smin:.3e}, {smax:.3e}]"),
        });
    }
    let target = DVector::from_column_slice(y);
    let coef = svd.solve(&target, 0.0).map_err(|e| Error::RankDeficient { branch: None, detail: e.to_string() })?;
    let v_t = svd.v_t.as_ref().expect("requested V");
    let inv_sq = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let xtx_inv = v_t.transpose() * inv_sq * v_t;
    let resid = target - &design * &coef;
    let sigma2 = if n > p { resid.norm_squared() / (n - p) as f64 } else { 0.0 };
    Ok(LinearFit { coef, xtx_inv, sigma2, n })
}

fn tag_branch(e: Error, k: usize) -> Error {
    match e {
        Error::RankDeficient { detail, .. } => Error::RankDeficient { branch: Some(k), detail },
        other => other,
    }
}

/// Fits the pooled regressor on all training points, then per branch a
/// linear fit of the pooled residuals, so `μ̂_k = μ̂ + μ̃_k`. The band
/// `σ̂_k(x)` is the standard-error curve of that branch fit, floored at
/// `1e-12`. Branches with too few points to fit fall back to the pooled
/// regressor and its band.
pub fn fit_regressors(training: &[SupBranch]) -> Result<RegressorBundle> {
    if training.is_empty() {
        return Err(Error::Empty("training branches"));
    }
    let xs: Vec<Vec<f64>> = training.iter().flat_map(|b| b.x.iter().cloned()).collect();
    let ys: Vec<f64> = training.iter().flat_map(|b| b.y.iter().copied()).collect();
    let pooled = Arc::new(fit_linear(&xs, &ys)?);
    let p = pooled.coef.len();

    let mut branch_mu: Vec<RegFn> = Vec::with_capacity(training.len());
    let mut branch_band: Vec<RegFn> = Vec::with_capacity(training.len());
    let mut residual_var = Vec::with_capacity(training.len());
    for (k, b) in training.iter().enumerate() {
        if b.len() < p {
            let (mu, band) = (pooled.clone(), pooled.clone());
            branch_mu.push(Arc::new(move |x: &[f64]| mu.predict(x)));
            branch_band.push(Arc::new(move |x: &[f64]| band.standard_error(x).max(SCALE_FLOOR)));
            residual_var.push(pooled.sigma2.max(SCALE_FLOOR));
            continue;
        }
        let resid: Vec<f64> = b.x.iter().zip(&b.y).map(|(x, y)| y - pooled.predict(x)).collect();
        let fit = Arc::new(fit_linear(&b.x, &resid).map_err(|e| tag_branch(e, k))?);
        let (base, adj, band) = (pooled.clone(), fit.clone(), fit.clone());
        branch_mu.push(Arc::new(move |x: &[f64]| base.predict(x) + adj.predict(x)));
        branch_band.push(Arc::new(move |x: &[f64]| band.standard_error(x).max(SCALE_FLOOR)));
        residual_var.push(fit.sigma2.max(SCALE_FLOOR));
    }
    let mu = pooled.clone();
    Ok(RegressorBundle { pooled_mu: Arc::new(move |x: &[f64]| mu.predict(x)), branch_mu, branch_band, residual_var })
}

/// Picks `c` from `grid` minimizing `Σ_k Σ_i Z̄'²_{ik} / σ̃²_k`.
///
/// The loss is piecewise constant in `c`, so ties are common: `2` wins if it
/// is among the minimizers, otherwise the smallest minimizer.
pub fn optimize_c(calib: &[SupBranch], reg: &RegressorBundle, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("c grid"));
    }
    if let Some(bad) = grid.iter().find(|c| c.is_nan() || **c < 0.0) {
        return Err(invalid(format!("interpolation constant must be non-negative, got {bad}")));
    }
    if reg.residual_var.len() != calib.len() {
        return Err(Error::DimensionMismatch { expected: calib.len(), got: reg.residual_var.len() });
    }
    let features = loss_features(calib, reg)?;
    let loss = |c: f64| loss_at(&features, reg, c);
    let losses: Vec<f64> = grid.iter().map(|&c| loss(c)).collect();
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let minimizers: Vec<f64> = grid.iter().zip(&losses).filter(|(_, l)| **l == best).map(|(c, _)| *c).collect();
    if minimizers.contains(&crate::DEFAULT_C) {
        return Ok(crate::DEFAULT_C);
    }
    Ok(minimizers.into_iter().fold(f64::INFINITY, f64::min))
}

fn loss_features(calib: &[SupBranch], reg: &RegressorBundle) -> Result<Vec<(usize, [f64; 3])>> {
    let mut features = Vec::new();
    for (k, b) in calib.iter().enumerate() {
        for (x, &y) in b.x.iter().zip(&b.y) {
            features.push((k, sup_leaf(reg, k, x, y)?));
        }
    }
    Ok(features)
}

fn loss_at(features: &[(usize, [f64; 3])], reg: &RegressorBundle, c: f64) -> f64 {
    features
        .iter()
        .map(|&(k, f)| {
            let r = leaf_residual(f, c);
            r * r / reg.residual_var[k]
        })
        .sum()
}

/// The empirical loss minimized by [`optimize_c`].
pub fn adaptive_loss(calib: &[SupBranch], reg: &RegressorBundle, c: f64) -> Result<f64> {
    if reg.residual_var.len() != calib.len() {
        return Err(Error::DimensionMismatch { expected: calib.len(), got: reg.residual_var.len() });
    }
    Ok(loss_at(&loss_features(calib, reg)?, reg, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn line(xs: &[f64], slope: f64, intercept: f64) -> SupBranch {
        SupBranch::new(xs.iter().map(|&x| vec![x]).collect(), xs.iter().map(|x| intercept + slope * x).collect()).unwrap()
    }

    fn grid10() -> Vec<f64> {
        (0..10).map(|i| -0.45 + 0.1 * i as f64).collect()
    }

    #[test]
    fn closed_form_simple_regression() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 2.9, 4.2, 4.9];
        let fit = fit_linear(&x.iter().map(|&v| vec![v]).collect::<Vec<_>>(), &y).unwrap();
        let xm = 2.5;
        let ym = y.iter().sum::<f64>() / 4.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
        let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
        let slope = sxy / sxx;
        assert!((fit.coef[1] - slope).abs() < 1e-12);
        assert!((fit.coef[0] - (ym - slope * xm)).abs() < 1e-12);
        let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - fit.predict(&[*a])).powi(2)).sum();
        let s2 = rss / 2.0;
        let se = (s2 * (0.25 + (5.0 - xm).powi(2) / sxx)).sqrt();
        assert!((fit.standard_error(&[5.0]) - se).abs() < 1e-12);
    }

    #[test]
    fn identical_noiseless_branches_share_the_pooled_fit() {
        let xs = grid10();
        let training = vec![line(&xs, 1.5, 0.2), line(&xs, 1.5, 0.2)];
        let reg = fit_regressors(&training).unwrap();
        for x in [-0.4, 0.0, 0.3] {
            let mu = (reg.pooled_mu)(&[x]);
            assert!(((reg.branch_mu[0])(&[x]) - mu).abs() < 1e-12);
            assert_eq!((reg.branch_band[1])(&[x]), SCALE_FLOOR.max((reg.branch_band[1])(&[x])));
            assert!((reg.branch_band[1])(&[x]) < 1e-10);
        }
    }

    #[test]
    fn single_branch_pooled_equals_branch() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let xs = grid10();
        let b = SupBranch::new(
            xs.iter().map(|&x| vec![x]).collect(),
            xs.iter().map(|x| 2.0 * x + rng.random_range(-0.1..0.1)).collect(),
        )
        .unwrap();
        let reg = fit_regressors(&[b]).unwrap();
        for x in [-0.3, 0.1] {
            assert!(((reg.pooled_mu)(&[x]) - (reg.branch_mu[0])(&[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_slopes() {
        let xs = grid10();
        let reg = fit_regressors(&[line(&xs, 1.0, 0.0), line(&xs, -1.0, 0.0)]).unwrap();
        let slope = |f: &RegFn| f(&[1.0]) - f(&[0.0]);
        assert!(slope(&reg.pooled_mu).abs() < 1e-8);
        assert!((slope(&reg.branch_mu[0]) - 1.0).abs() < 1e-8);
        assert!((slope(&reg.branch_mu[1]) + 1.0).abs() < 1e-8);
    }

    #[test]
    fn rank_deficient_design_rejected() {
        let constant_x = SupBranch::new(vec![vec![0.2]; 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ok = line(&grid10(), 1.0, 0.0);
        let err = fit_regressors(&[ok, constant_x]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { branch: Some(1), .. }), "{err}");
        assert!(fit_linear(&[vec![1.0]], &[1.0]).is_err());
    }

    #[test]
    fn tiny_branches_fall_back_to_pooled() {
        let tiny = SupBranch::new(vec![vec![0.1]], vec![0.3]).unwrap();
        let reg = fit_regressors(&[line(&grid10(), 1.0, 0.0), tiny]).unwrap();
        assert_eq!((reg.branch_mu[1])(&[0.2]), (reg.pooled_mu)(&[0.2]));
    }

    #[test]
    fn c_selection() {
        let xs = grid10();
        let same = vec![line(&xs, 1.0, 0.0), line(&xs, 1.0, 0.0)];
        let reg = fit_regressors(&same).unwrap();
        assert_eq!(optimize_c(&same, &reg, &[0.5, 1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(optimize_c(&same, &reg, &[2.0]).unwrap(), 2.0);

        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let noisy = |slope: f64, rng: &mut ChaCha20Rng| {
            SupBranch::new(
                xs.iter().map(|&x| vec![x]).collect(),
                xs.iter().map(|x| slope * x + 20.0 * slope.signum() + rng.random_range(-0.3..0.3)).collect(),
            )
            .unwrap()
        };
        let train = vec![noisy(1.0, &mut rng), noisy(-1.0, &mut rng)];
        let calib = vec![noisy(1.0, &mut rng), noisy(-1.0, &mut rng)];
        let reg = fit_regressors(&train).unwrap();
        let grid = [0.0, 0.5, 1.0, 2.0, f64::INFINITY];
        let c = optimize_c(&calib, &reg, &grid).unwrap();
        assert!(c.is_finite());
        let chosen = adaptive_loss(&calib, &reg, c).unwrap();
        assert!(chosen < adaptive_loss(&calib, &reg, f64::INFINITY).unwrap());
    }
}
