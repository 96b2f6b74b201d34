//! Distributionally equivariant transforms `V` from data to score space.
//!
//! Hierarchical data is stored branch by branch. When a transform is viewed
//! as a map on flat vectors, entry `i` of branch `k` sits at `k * M + i`,
//! which is the layout used by [`crate::groups::BlockPermutation::act`].

mod equivariance;
mod hierarchical;
mod mpgnn;
mod regression;

pub use equivariance::{check_distributional_equivariance, BuiltinMap, EquivarianceReport};
pub use hierarchical::{
    flatten, hierarchical_proxy_transform, hierarchical_sup_direct, hierarchical_sup_direct_with, hierarchical_sup_transform,
    hierarchical_unsup_network, hierarchical_unsup_transform, hierarchical_unsup_transform_with, unflatten, HierarchicalData,
    HierarchicalUnsup, Scale, SupBranch,
};
pub use mpgnn::{
    five_step_layers, interpolation_layers, mpgnn_forward, proxy_layers, Lambda0, Lambda1, MpLayer, NodeKind,
    TreeGraph,
};
pub use regression::{adaptive_loss, fit_linear, fit_regressors, optimize_c, LinearFit, RegFn, RegressorBundle};

pub(crate) use hierarchical::{branch_mean, choose_center, grand_mean, leaf_residual, sup_leaf};

use crate::error::Result;

/// Floor applied to scale estimates before dividing by them.
pub const SCALE_FLOOR: f64 = 1e-12;

/// A map from flat data vectors to flat score vectors.
pub trait EquivariantMap: Send + Sync {
    fn apply(&self, z: &[f64]) -> Result<Vec<f64>>;
}

impl<F> EquivariantMap for F
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self(z))
    }
}

/// Conformal scores `z̃_j = s(z_j; z)`, where `s` may look at the whole
/// vector but must not depend on the order of the other coordinates.
pub fn coordinatewise_score<S>(z: &[f64], score: S) -> Vec<f64>
where
    S: Fn(f64, &[f64]) -> f64,
{
    z.iter().map(|&zj| score(zj, z)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_score() {
        assert_eq!(coordinatewise_score(&[3.0, 1.0, 2.0], |x, _| x), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn deviation_from_mean() {
        let s = coordinatewise_score(&[0.0, 2.0, 4.0], |x, z| (x - crate::stats::mean(z)).abs());
        assert_eq!(s, vec![2.0, 0.0, 2.0]);
    }

    #[test]
    fn residual_against_zero_regressor() {
        let mu = |_x: f64| 0.0;
        let y = [1.0, -2.0];
        let s = coordinatewise_score(&y, |v, _| (v - mu(0.0)).abs());
        assert_eq!(s, vec![1.0, 2.0]);
    }
}
