use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::RngCore;

use super::calibrator::map_candidates;
use super::quantile::{check_alpha, check_weights, keeps_unweighted, keeps_weighted};
use super::set::{CandidateGrid, PredictionSet};
use crate::error::{invalid, Error, Result};
use crate::groups::GroupAction;
use crate::LEVEL_EPS;

/// Representatives `g_1, …, g_F` with sampling weights `w_1, …, w_F`.
#[derive(Clone, Debug)]
pub struct WeightSpec<E> {
    representatives: Vec<E>,
    weights: Vec<f64>,
    uniform: bool,
}

impl<E: Clone> WeightSpec<E> {
    pub fn new(representatives: Vec<E>, weights: Vec<f64>) -> Result<Self> {
        if representatives.is_empty() {
            return Err(Error::Empty("weight representatives"));
        }
        check_weights(representatives.len(), &weights, 1e-12)?;
        let uniform = weights.iter().all(|&w| w == weights[0]);
        Ok(Self { representatives, weights, uniform })
    }

    pub fn uniform(representatives: Vec<E>) -> Result<Self> {
        let n = representatives.len();
        if n == 0 {
            return Err(Error::Empty("weight representatives"));
        }
        Self::new(representatives, vec![1.0 / n as f64; n])
    }

    pub fn representatives(&self) -> &[E] {
        &self.representatives
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Index of one draw from the categorical law of the weights.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<usize> {
        let dist = WeightedIndex::new(&self.weights).map_err(|e| invalid(format!("weights: {e}")))?;
        Ok(dist.sample(rng))
    }
}

/// Decision for one completion `z` with the sampled representative index
/// `j`: with `z̃' = V(ρ(g_j)⁻¹ z)`, keep iff `ψ(ρ̃(g_j) z̃')` is at most the
/// weighted `1 - α` quantile of `ψ(ρ̃(g_i) z̃')`.
pub fn nonsym_keep<A, V, P>(
    z: &A::Point,
    transform: V,
    psi: P,
    action: &A,
    spec: &WeightSpec<A::Element>,
    j: usize,
    alpha: f64,
) -> Result<bool>
where
    A: GroupAction,
    V: Fn(&A::Point) -> Result<A::Point>,
    P: Fn(&A::Point) -> f64,
{
    check_alpha(alpha)?;
    let g = spec.representatives.get(j).ok_or_else(|| invalid(format!("representative index {j} out of range")))?;
    let zt = transform(&action.act(&action.inverse(g), z))?;
    let values: Vec<f64> = spec.representatives.iter().map(|h| psi(&action.act(h, &zt))).collect();
    let own = values[j];
    let level = 1.0 - alpha;
    Ok(if spec.uniform { keeps_unweighted(&values, own, level) } else { keeps_weighted(&values, &spec.weights, own, level) })
}

/// Draws `g ~ Γ` once and applies [`nonsym_keep`] to every candidate.
/// Returns the set together with the sampled index.
#[allow(clippy::too_many_arguments)]
pub fn nonsym_set<A, E, V, P>(
    grid: &CandidateGrid,
    embed: E,
    transform: V,
    psi: P,
    action: &A,
    spec: &WeightSpec<A::Element>,
    alpha: f64,
    rng: &mut dyn RngCore,
) -> Result<(PredictionSet, usize)>
where
    A: GroupAction,
    E: Fn(f64) -> A::Point + Sync,
    V: Fn(&A::Point) -> Result<A::Point> + Sync,
    P: Fn(&A::Point) -> f64 + Sync,
{
    check_alpha(alpha)?;
    let j = spec.sample(rng)?;
    let member = map_candidates(grid.points(), |y| nonsym_keep(&embed(y), &transform, &psi, action, spec, j, alpha))?;
    let level = 1.0 - alpha;
    let unbounded = if spec.uniform {
        super::quantile::quantile_rank(level, spec.len()) >= spec.len()
    } else {
        1.0 - spec.weights[j] + 1e-9 < level - LEVEL_EPS
    };
    Ok((PredictionSet::new(grid, member, unbounded)?, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{symmpi_set, Calibrator};
    use crate::groups::{Permutation, SymmetricGroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn last(z: &Vec<f64>) -> f64 {
        z[z.len() - 1]
    }

    #[test]
    fn spec_validation() {
        let g = SymmetricGroup::new(3).unwrap();
        let reps = g.transposition_cosets(2);
        assert!(WeightSpec::new(reps.clone(), vec![0.2, 0.3, 0.5]).is_ok());
        assert!(WeightSpec::new(reps.clone(), vec![0.2, 0.3, 0.6]).is_err());
        assert!(WeightSpec::new(reps.clone(), vec![-0.2, 0.7, 0.5]).is_err());
        assert!(WeightSpec::new(reps, vec![0.5, 0.5]).is_err());
        assert!(WeightSpec::<Permutation>::uniform(vec![]).is_err());
    }

    #[test]
    fn point_mass_keeps_everything() {
        let g = SymmetricGroup::new(3).unwrap();
        let spec = WeightSpec::new(g.transposition_cosets(2), vec![0.0, 1.0, 0.0]).unwrap();
        let grid = CandidateGrid::uniform(-10.0, 10.0, 21).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (set, j) = nonsym_set(&grid, |y| vec![0.3, -0.1, y], |z: &Vec<f64>| Ok(z.iter().map(|v| v * v).collect()), last, &g, &spec, 0.1, &mut rng).unwrap();
        assert_eq!(j, 1);
        assert!(set.unbounded);
        assert_eq!(set.count(), 21);
    }

    #[test]
    fn two_point_weighted_enumeration() {
        // z = (a, b, y); representatives swap position j with the last one.
        let g = SymmetricGroup::new(3).unwrap();
        let weights = [0.2, 0.3, 0.5];
        let spec = WeightSpec::new(g.transposition_cosets(2), weights.to_vec()).unwrap();
        let (a, b) = (1.0, 4.0);
        let psi = |z: &Vec<f64>| z[2].abs();
        let ident = |z: &Vec<f64>| Ok(z.clone());
        for j in 0..3 {
            for alpha in [0.1, 0.3, 0.45, 0.6, 0.75] {
                for y in [-5.0, -2.0, 0.0, 0.5, 2.0, 3.5, 6.0] {
                    let z: Vec<f64> = vec![a, b, y];
                    // Undo the sampled swap, then read each coordinate.
                    let mut zp = z.clone();
                    zp.swap(j, 2);
                    let vals: Vec<f64> = zp.iter().map(|v: &f64| v.abs()).collect();
                    let own = vals[j];
                    let mut order: Vec<usize> = (0..3).collect();
                    order.sort_by(|&p, &q| vals[p].total_cmp(&vals[q]));
                    let mut cum = 0.0;
                    let mut q = f64::INFINITY;
                    for i in order {
                        cum += weights[i];
                        if cum >= 1.0 - alpha - 1e-12 {
                            q = vals[i];
                            break;
                        }
                    }
                    let got = nonsym_keep(&z, ident, psi, &g, &spec, j, alpha).unwrap();
                    assert_eq!(got, own <= q, "j={j} alpha={alpha} y={y}");
                }
            }
        }
    }

    #[test]
    fn uniform_weights_match_symmetric_set() {
        let g = SymmetricGroup::new(4).unwrap();
        let reps = g.transposition_cosets(3);
        let spec = WeightSpec::uniform(reps.clone()).unwrap();
        let cal = Calibrator::cosets(&g, reps).unwrap();
        let grid = CandidateGrid::uniform(-4.0, 4.0, 81).unwrap();
        let embed = |y: f64| vec![0.7, -1.2, 2.2, y];
        let v = |z: &Vec<f64>| Ok(z.iter().map(|x: &f64| (x - 0.1).abs()).collect::<Vec<f64>>());
        for seed in 0..20 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let (a, _) = nonsym_set(&grid, embed, v, last, &g, &spec, 0.25, &mut rng).unwrap();
            let b = symmpi_set(&grid, embed, v, last, &cal, 0.25).unwrap();
            assert_eq!(a.member, b.member);
        }
    }
}
