use serde::{Deserialize, Serialize};

use super::mpgnn::{five_step_layers, interpolation_layers, mpgnn_forward, proxy_layers, TreeGraph};
use super::{EquivariantMap, RegressorBundle, SCALE_FLOOR};
use crate::error::{invalid, Error, Result};

/// One branch of supervised data: covariate rows and responses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupBranch {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl SupBranch {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Splits into the first `n` points and the rest.
    pub fn split_at(&self, n: usize) -> (SupBranch, SupBranch) {
        let n = n.min(self.len());
        (
            SupBranch { x: self.x[..n].to_vec(), y: self.y[..n].to_vec() },
            SupBranch { x: self.x[n..].to_vec(), y: self.y[n..].to_vec() },
        )
    }
}

/// Two-layer hierarchical data: `K` branches of scalars or of `(x, y)`
/// pairs. Branch lengths may differ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum HierarchicalData {
    Unsupervised(Vec<Vec<f64>>),
    Supervised(Vec<SupBranch>),
}

impl HierarchicalData {
    pub fn branches(&self) -> usize {
        match self {
            Self::Unsupervised(b) => b.len(),
            Self::Supervised(b) => b.len(),
        }
    }

    pub fn branch_sizes(&self) -> Vec<usize> {
        match self {
            Self::Unsupervised(b) => b.iter().map(Vec::len).collect(),
            Self::Supervised(b) => b.iter().map(SupBranch::len).collect(),
        }
    }

    /// Common branch size, or `None` for ragged data.
    pub fn fixed_size(&self) -> Option<usize> {
        let sizes = self.branch_sizes();
        let first = *sizes.first()?;
        sizes.iter().all(|&s| s == first).then_some(first)
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches() == 0 {
            return Err(Error::Empty("hierarchical data has no branches"));
        }
        if self.branch_sizes().contains(&0) {
            return Err(Error::Empty("hierarchical branch"));
        }
        if let Self::Supervised(b) = self {
            let d = b[0].x.first().map_or(0, Vec::len);
            for branch in b {
                if branch.x.len() != branch.y.len() {
                    return Err(Error::DimensionMismatch { expected: branch.x.len(), got: branch.y.len() });
                }
                if let Some(row) = branch.x.iter().find(|r| r.len() != d) {
                    return Err(Error::DimensionMismatch { expected: d, got: row.len() });
                }
            }
        }
        Ok(())
    }
}

/// Per-branch standardization of hierarchical scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Divide by the branch's sample SD `σ̂_k` (unsupervised) or residual
    /// scale `ε̂_k` (supervised).
    #[default]
    BranchSd,
    /// Raw absolute deviations: scores are not divided by `σ̂_k` or `ε̂_k`.
    /// The closeness test `|z̄_k - z̄| ≤ c σ̂_k / √n_k` still uses `σ̂_k`.
    Raw,
}

impl Scale {
    /// `(scale in the closeness test, divisor of the scores)`.
    pub(crate) fn unsup(self, b: &[f64], mean: f64) -> (f64, f64) {
        match self {
            Self::BranchSd => {
                let s = branch_scale(b, mean);
                (s, s)
            }
            Self::Raw => (branch_scale(b, mean), 1.0),
        }
    }

    pub(crate) fn sup(self, residuals: &[f64]) -> f64 {
        match self {
            Self::BranchSd => eps_hat(residuals),
            Self::Raw => 1.0,
        }
    }
}

pub(crate) fn branch_mean(b: &[f64]) -> f64 {
    b.iter().sum::<f64>() / b.len() as f64
}

/// `σ̂_k`: sample SD with the `n - 1` denominator, `1` for a single point.
pub(crate) fn branch_scale(b: &[f64], mean: f64) -> f64 {
    if b.len() == 1 {
        return 1.0;
    }
    let ss: f64 = b.iter().map(|z| (z - mean) * (z - mean)).sum();
    (ss / (b.len() - 1) as f64).sqrt().max(SCALE_FLOOR)
}

pub(crate) fn grand_mean(means: &[f64]) -> f64 {
    means.iter().sum::<f64>() / means.len() as f64
}

/// Grand mean when the branch mean is within `c σ̂_k / √n_k` of it, else the
/// branch mean.
pub(crate) fn choose_center(mean: f64, scale: f64, n: usize, grand: f64, c: f64) -> f64 {
    if (mean - grand).abs() <= c * scale / (n as f64).sqrt() {
        grand
    } else {
        mean
    }
}

fn check_c(c: f64) -> Result<()> {
    if c.is_nan() || c < 0.0 {
        return Err(invalid(format!("interpolation constant must be non-negative, got {c}")));
    }
    Ok(())
}

fn check_branches(branches: &[Vec<f64>]) -> Result<()> {
    if branches.is_empty() {
        return Err(Error::Empty("hierarchical data has no branches"));
    }
    if branches.iter().any(Vec::is_empty) {
        return Err(Error::Empty("hierarchical branch"));
    }
    Ok(())
}

/// Standardized absolute deviations from an adaptively chosen center.
///
/// Branch `k` is centered at the grand mean (the mean of branch means) when
/// `|z̄_k - z̄| ≤ c σ̂_k / √n_k` and at its own mean otherwise; every score is
/// divided by `σ̂_k`. `c = ∞` always pools. Ragged branches are allowed.
pub fn hierarchical_unsup_transform(branches: &[Vec<f64>], c: f64) -> Result<Vec<Vec<f64>>> {
    hierarchical_unsup_transform_with(branches, c, Scale::BranchSd)
}

/// [`hierarchical_unsup_transform`] under a chosen [`Scale`].
pub fn hierarchical_unsup_transform_with(branches: &[Vec<f64>], c: f64, scale: Scale) -> Result<Vec<Vec<f64>>> {
    check_c(c)?;
    check_branches(branches)?;
    let means: Vec<f64> = branches.iter().map(|b| branch_mean(b)).collect();
    let grand = grand_mean(&means);
    Ok(branches
        .iter()
        .zip(&means)
        .map(|(b, &m)| {
            let (t, s) = scale.unsup(b, m);
            let center = choose_center(m, t, b.len(), grand, c);
            b.iter().map(|z| (z - center).abs() / s).collect()
        })
        .collect())
}

/// Within-branch standardization `|z - z̄_k| / σ̂_k`, computed by the
/// two-layer proxy network.
pub fn hierarchical_proxy_transform(branches: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_branches(branches)?;
    let tree = TreeGraph::from_leaf_values(branches, 4);
    Ok(leaf_channel(&mpgnn_forward(&tree, &proxy_layers()), 0))
}

fn leaf_channel(tree: &TreeGraph, ch: usize) -> Vec<Vec<f64>> {
    tree.leaves.iter().map(|b| b.iter().map(|f| f[ch]).collect()).collect()
}

/// The adaptive transform evaluated by the interpolation network rather than
/// the closed form. Agrees with [`hierarchical_unsup_transform`].
pub fn hierarchical_unsup_network(branches: &[Vec<f64>], c: f64) -> Result<Vec<Vec<f64>>> {
    check_c(c)?;
    check_branches(branches)?;
    let tree = TreeGraph::from_leaf_values(branches, 4);
    Ok(leaf_channel(&mpgnn_forward(&tree, &interpolation_layers(c)), 0))
}

/// Leaf features `(y - μ̂_k(x), y - μ̂(x), σ̂_k(x))`.
pub(crate) fn sup_leaf(reg: &RegressorBundle, k: usize, x: &[f64], y: f64) -> Result<[f64; 3]> {
    let band = (reg.branch_band[k])(x);
    if !(band > 0.0 && band.is_finite()) {
        return Err(Error::DegenerateBand { branch: k, x: x.to_vec() });
    }
    Ok([y - (reg.branch_mu[k])(x), y - (reg.pooled_mu)(x), band])
}

/// Absolute adaptive residual from leaf features: the pooled residual when
/// the branch and pooled fits are within `c` bands, else the branch
/// residual.
pub(crate) fn leaf_residual(f: [f64; 3], c: f64) -> f64 {
    let gap = f[0] - f[1];
    let shift = if (gap / f[2]).abs() <= c { gap } else { 0.0 };
    (f[0] - shift).abs()
}

/// `ε̂_k = sqrt(Σ r² / (M - 1))`, or `1` for a single point.
pub(crate) fn eps_hat(residuals: &[f64]) -> f64 {
    if residuals.len() == 1 {
        return 1.0;
    }
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    (ss / (residuals.len() - 1) as f64).sqrt().max(SCALE_FLOOR)
}

fn check_sup(calib: &[SupBranch], reg: &RegressorBundle) -> Result<()> {
    if calib.is_empty() {
        return Err(Error::Empty("hierarchical data has no branches"));
    }
    if calib.iter().any(SupBranch::is_empty) {
        return Err(Error::Empty("hierarchical branch"));
    }
    if reg.branch_mu.len() != calib.len() || reg.branch_band.len() != calib.len() {
        return Err(Error::DimensionMismatch { expected: calib.len(), got: reg.branch_mu.len() });
    }
    Ok(())
}

/// Supervised scores `|Z̄'| / ε̂_k`, computed by the five-step message
/// passing network on the two-layer tree.
pub fn hierarchical_sup_transform(calib: &[SupBranch], reg: &RegressorBundle, c: f64) -> Result<Vec<Vec<f64>>> {
    check_c(c)?;
    check_sup(calib, reg)?;
    let mut leaves = Vec::with_capacity(calib.len());
    for (k, b) in calib.iter().enumerate() {
        let row: Result<Vec<Vec<f64>>> =
            b.x.iter().zip(&b.y).map(|(x, &y)| sup_leaf(reg, k, x, y).map(|f| f.to_vec())).collect();
        leaves.push(row?);
    }
    let tree = TreeGraph {
        root: vec![1.0; 3],
        branches: vec![vec![1.0; 3]; calib.len()],
        leaves,
    };
    Ok(leaf_channel(&mpgnn_forward(&tree, &five_step_layers(c)), 0))
}

/// The same scores evaluated straight from the closed form, as an
/// independent check on the network.
pub fn hierarchical_sup_direct(calib: &[SupBranch], reg: &RegressorBundle, c: f64) -> Result<Vec<Vec<f64>>> {
    hierarchical_sup_direct_with(calib, reg, c, Scale::BranchSd)
}

/// [`hierarchical_sup_direct`] under a chosen [`Scale`].
pub fn hierarchical_sup_direct_with(calib: &[SupBranch], reg: &RegressorBundle, c: f64, scale: Scale) -> Result<Vec<Vec<f64>>> {
    check_c(c)?;
    check_sup(calib, reg)?;
    let mut out = Vec::with_capacity(calib.len());
    for (k, b) in calib.iter().enumerate() {
        let mut numer = Vec::with_capacity(b.len());
        for (x, &y) in b.x.iter().zip(&b.y) {
            let mu = (reg.pooled_mu)(x);
            let mu_k = (reg.branch_mu[k])(x);
            let band = (reg.branch_band[k])(x);
            if !(band > 0.0 && band.is_finite()) {
                return Err(Error::DegenerateBand { branch: k, x: x.clone() });
            }
            let close = ((mu_k - mu) / band).abs() <= c;
            numer.push(if close { y - mu } else { y - mu_k });
        }
        let eps = match scale {
            Scale::Raw => 1.0,
            Scale::BranchSd if numer.len() == 1 => 1.0,
            Scale::BranchSd => (numer.iter().map(|r| r * r).sum::<f64>() / (numer.len() - 1) as f64).sqrt().max(SCALE_FLOOR),
        };
        out.push(numer.iter().map(|r| r.abs() / eps).collect());
    }
    Ok(out)
}

/// Row-major flattening of equal-length branches.
pub fn flatten(branches: &[Vec<f64>]) -> Vec<f64> {
    branches.iter().flatten().copied().collect()
}

pub fn unflatten(z: &[f64], block_size: usize) -> Vec<Vec<f64>> {
    z.chunks(block_size).map(<[f64]>::to_vec).collect()
}

/// The adaptive unsupervised transform on flat `K × M` vectors.
#[derive(Clone, Copy, Debug)]
pub struct HierarchicalUnsup {
    pub blocks: usize,
    pub block_size: usize,
    pub c: f64,
}

impl EquivariantMap for HierarchicalUnsup {
    fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.blocks * self.block_size {
            return Err(Error::DimensionMismatch { expected: self.blocks * self.block_size, got: z.len() });
        }
        Ok(flatten(&hierarchical_unsup_transform(&unflatten(z, self.block_size), self.c)?))
    }
}
