use rand::RngCore;

use super::quantile::{check_alpha, keeps_unweighted, quantile_rank, Threshold};
use super::set::{CandidateGrid, PredictionSet};
use crate::error::{Error, Result};
use crate::groups::GroupAction;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibrationMode {
    /// Every group element.
    Exact,
    /// One representative per coset of the subgroup fixing `ψ`.
    Cosets,
    /// `ψ(z̃)` together with `M` uniform draws.
    MonteCarlo,
}

/// The finite list of group elements whose values `ψ(ρ̃(g) z̃)` define the
/// threshold. Monte Carlo draws are made once, at construction, and reused
/// for every candidate.
pub struct Calibrator<'a, A: GroupAction> {
    action: &'a A,
    elements: Vec<A::Element>,
    mode: CalibrationMode,
}

impl<'a, A: GroupAction> Calibrator<'a, A> {
    pub fn exact(action: &'a A) -> Result<Self> {
        let elements: Vec<_> = action
            .elements()
            .ok_or_else(|| Error::NotEnumerable("exact calibration needs an enumerable group".into()))?
            .collect();
        Ok(Self { action, elements, mode: CalibrationMode::Exact })
    }

    /// Representatives must contain one element of every coset, including
    /// the subgroup itself.
    pub fn cosets(action: &'a A, representatives: Vec<A::Element>) -> Result<Self> {
        if representatives.is_empty() {
            return Err(Error::Empty("coset representatives"));
        }
        Ok(Self { action, elements: representatives, mode: CalibrationMode::Cosets })
    }

    pub fn monte_carlo(action: &'a A, draws: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if draws == 0 {
            return Err(crate::error::invalid("Monte Carlo calibration needs at least one draw"));
        }
        let elements = (0..draws).map(|_| action.sample_uniform(rng)).collect();
        Ok(Self { action, elements, mode: CalibrationMode::MonteCarlo })
    }

    /// Monte Carlo draws taken uniformly from a list of coset representatives.
    pub fn monte_carlo_cosets(
        action: &'a A,
        representatives: &[A::Element],
        draws: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if representatives.is_empty() {
            return Err(Error::Empty("coset representatives"));
        }
        if draws == 0 {
            return Err(crate::error::invalid("Monte Carlo calibration needs at least one draw"));
        }
        let n = representatives.len() as u64;
        let elements = (0..draws)
            .map(|_| representatives[(rand::Rng::random_range(&mut *rng, 0..n)) as usize].clone())
            .collect();
        Ok(Self { action, elements, mode: CalibrationMode::MonteCarlo })
    }

    pub fn mode(&self) -> CalibrationMode {
        self.mode
    }

    pub fn action(&self) -> &A {
        self.action
    }

    pub fn elements(&self) -> &[A::Element] {
        &self.elements
    }

    /// Number of values entering the quantile.
    pub fn size(&self) -> usize {
        self.elements.len() + usize::from(self.mode == CalibrationMode::MonteCarlo)
    }

    pub fn values<P>(&self, zt: &A::Point, psi: P) -> Vec<f64>
    where
        P: Fn(&A::Point) -> f64,
    {
        let mut out = Vec::with_capacity(self.size());
        if self.mode == CalibrationMode::MonteCarlo {
            out.push(psi(zt));
        }
        out.extend(self.elements.iter().map(|g| psi(&self.action.act(g, zt))));
        out
    }

    pub fn threshold<P>(&self, zt: &A::Point, psi: P, alpha: f64) -> Result<Threshold>
    where
        P: Fn(&A::Point) -> f64,
    {
        Threshold::from_values(&self.values(zt, psi), None, alpha)
    }

    /// `ψ(z̃) ≤ t_z̃`.
    pub fn keeps<P>(&self, zt: &A::Point, psi: P, alpha: f64) -> bool
    where
        P: Fn(&A::Point) -> f64,
    {
        let own = psi(zt);
        keeps_unweighted(&self.values(zt, psi), own, 1.0 - alpha)
    }

    /// True when the quantile is the orbit maximum (or `+∞`), so that every
    /// candidate is kept.
    pub fn always_keeps(&self, alpha: f64) -> bool {
        quantile_rank(1.0 - alpha, self.size()) >= self.size()
    }
}

/// Evaluates `f` at every candidate, in parallel when enabled.
pub(crate) fn map_candidates<T, F>(points: &[f64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(|&y| f(y)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(|&y| f(y)).collect()
    }
}

/// Keeps each candidate `y` whose completion `z = embed(y)` satisfies
/// `ψ(V(z)) ≤ t_{V(z)}`.
pub fn symmpi_set<A, E, V, P>(
    grid: &CandidateGrid,
    embed: E,
    transform: V,
    psi: P,
    cal: &Calibrator<'_, A>,
    alpha: f64,
) -> Result<PredictionSet>
where
    A: GroupAction,
    E: Fn(f64) -> A::Point + Sync,
    V: Fn(&A::Point) -> Result<A::Point> + Sync,
    P: Fn(&A::Point) -> f64 + Sync,
{
    check_alpha(alpha)?;
    let member = map_candidates(grid.points(), |y| {
        let zt = transform(&embed(y))?;
        Ok(cal.keeps(&zt, &psi, alpha))
    })?;
    PredictionSet::new(grid, member, cal.always_keeps(alpha))
}

/// Membership of a single completion `z`.
pub fn symmpi_keep<A, V, P>(z: &A::Point, transform: V, psi: P, cal: &Calibrator<'_, A>, alpha: f64) -> Result<bool>
where
    A: GroupAction,
    V: Fn(&A::Point) -> Result<A::Point>,
    P: Fn(&A::Point) -> f64,
{
    check_alpha(alpha)?;
    let zt = transform(z)?;
    Ok(cal.keeps(&zt, &psi, alpha))
}

/// Randomized set: keep when `ψ < t`, or on a tie when `u' < Δ`. One `u'`
/// is shared by every candidate.
pub fn randomized_set<A, E, V, P>(
    grid: &CandidateGrid,
    embed: E,
    transform: V,
    psi: P,
    cal: &Calibrator<'_, A>,
    alpha: f64,
    u_prime: f64,
) -> Result<PredictionSet>
where
    A: GroupAction,
    E: Fn(f64) -> A::Point + Sync,
    V: Fn(&A::Point) -> Result<A::Point> + Sync,
    P: Fn(&A::Point) -> f64 + Sync,
{
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&u_prime) {
        return Err(crate::error::invalid(format!("u' must lie in [0, 1], got {u_prime}")));
    }
    let member = map_candidates(grid.points(), |y| {
        let zt = transform(&embed(y))?;
        let t = cal.threshold(&zt, &psi, alpha)?;
        Ok(t.keeps_randomized(psi(&zt), u_prime))
    })?;
    PredictionSet::new(grid, member, false)
}
