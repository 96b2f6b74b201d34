use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal, StandardNormal};

use super::config::HierarchicalConfig;
use crate::error::{invalid, Result};
use crate::transforms::{HierarchicalData, SupBranch};

/// Unsupervised draw: every branch observed except the last entry of the
/// last branch, which is held out as `truth`.
#[derive(Clone, Debug)]
pub struct UnsupDraw {
    pub observed: Vec<Vec<f64>>,
    pub truth: f64,
    pub locations: Vec<f64>,
}

impl UnsupDraw {
    pub fn complete(&self) -> HierarchicalData {
        let mut b = self.observed.clone();
        b.last_mut().expect("at least one branch").push(self.truth);
        HierarchicalData::Unsupervised(b)
    }
}

/// Supervised draw: training halves, calibration halves with the last
/// calibration response of the last branch held out.
#[derive(Clone, Debug)]
pub struct SupDraw {
    pub train: Vec<SupBranch>,
    pub calib: Vec<SupBranch>,
    pub x_star: Vec<f64>,
    pub truth: f64,
    pub slopes: Vec<f64>,
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    Normal::new(mean, sd).map_err(|e| invalid(format!("normal law: {e}")))
}

/// `μ_k ~ N(0, s²)` with `s` from the config's between-branch convention,
/// then `Z_i^(k) ~ N(μ_k, noise_sd²)`.
pub fn gen_unsup(config: &HierarchicalConfig, rng: &mut dyn RngCore) -> Result<UnsupDraw> {
    config.validate()?;
    let between = normal(0.0, config.between_sd())?;
    let mut observed = Vec::with_capacity(config.branches);
    let mut locations = Vec::with_capacity(config.branches);
    for _ in 0..config.branches {
        let n = config.sizes.sample(rng);
        let mu = between.sample(rng);
        let noise = normal(mu, config.noise_sd)?;
        observed.push((0..n).map(|_| noise.sample(rng)).collect::<Vec<f64>>());
        locations.push(mu);
    }
    let truth = observed.last_mut().and_then(Vec::pop).expect("branches are non-empty");
    Ok(UnsupDraw { observed, truth, locations })
}

/// `θ_k ~ N(0, s²)`, `X ~ U(-0.5, 0.5)`, `Y = θ_k X + ε` with
/// `ε ~ N(0, noise_sd²)`. The first half (rounded up) of each branch trains.
pub fn gen_sup(config: &HierarchicalConfig, rng: &mut dyn RngCore) -> Result<SupDraw> {
    config.validate()?;
    let between = normal(0.0, config.between_sd())?;
    let noise = normal(0.0, config.noise_sd)?;
    let mut train = Vec::with_capacity(config.branches);
    let mut calib = Vec::with_capacity(config.branches);
    let mut slopes = Vec::with_capacity(config.branches);
    for _ in 0..config.branches {
        let n = config.sizes.sample(rng);
        let theta = between.sample(rng);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-0.5..0.5)]).collect();
        let y: Vec<f64> = x.iter().map(|r| theta * r[0] + noise.sample(rng)).collect();
        let (tr, ca) = SupBranch { x, y }.split_at(n.div_ceil(2));
        train.push(tr);
        calib.push(ca);
        slopes.push(theta);
    }
    let last = calib.last_mut().expect("at least one branch");
    let x_star = last.x.pop().expect("calibration half is non-empty");
    let truth = last.y.pop().expect("calibration half is non-empty");
    Ok(SupDraw { train, calib, x_star, truth, slopes })
}

/// `n` i.i.d. draws from `N(0, scale · I_p)`.
pub fn gen_rotational(n: usize, p: usize, scale: f64, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    if p == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(invalid(format!("scale must be finite and non-negative, got {scale}")));
    }
    let sd = scale.sqrt();
    Ok((0..n).map(|_| (0..p).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng)).collect()).collect())
}
