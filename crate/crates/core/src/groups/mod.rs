//! Groups, actions and uniform sampling.
//!
//! Every group used by the engine implements [`GroupAction`]: composition,
//! inversion, uniform (Haar) sampling and an action on points. Finite groups
//! can also be enumerated, either streamed through [`GroupAction::elements`]
//! or summarised by coset representatives.
//!
//! Permutations act on coordinate vectors by `(g·z)_i = z_{g⁻¹(i)}`, so the
//! value at index `i` moves to index `g(i)`. This convention is used by every
//! action in the crate.

mod automorphism;
mod block;
mod cosets;
mod orthogonal;
mod permutation;

pub use automorphism::{
    enumerate_automorphisms, enumerate_automorphisms_with_cap, orbit_of_index,
    GraphAutomorphismGroup, IndexMap, Orbit, PermutationGroup, AUTOMORPHISM_CAP,
};
pub use block::{sample_block_permutation, BlockPermutation, BlockPermutationGroup};
pub use cosets::{coset_representatives, coset_representatives_by_probe, CosetDecomposition};
pub use orthogonal::{sample_haar_orthogonal, OrthogonalGroup, OrthogonalMatrix, RotationPermutationGroup};
pub use permutation::{sample_uniform_permutation, Permutation, SymmetricGroup, TrivialGroup};

use rand::RngCore;

/// Largest group order that [`GroupAction::elements`] will stream.
pub const ENUMERATION_CAP: u128 = 5_000_000;

/// A group together with an action on a point space.
pub trait GroupAction: Send + Sync {
    type Element: Clone + Send + Sync + std::fmt::Debug;
    type Point: Clone;

    fn identity(&self) -> Self::Element;

    /// `g ∘ h`, i.e. apply `h` first.
    fn compose(&self, g: &Self::Element, h: &Self::Element) -> Self::Element;

    fn inverse(&self, g: &Self::Element) -> Self::Element;

    fn sample_uniform(&self, rng: &mut dyn RngCore) -> Self::Element;

    fn act(&self, g: &Self::Element, z: &Self::Point) -> Self::Point;

    /// Group order, `None` for infinite groups or orders beyond `u128`.
    fn order(&self) -> Option<u128> {
        None
    }

    /// Streams every element once, or `None` when the group is infinite or
    /// larger than [`ENUMERATION_CAP`].
    fn elements(&self) -> Option<Box<dyn Iterator<Item = Self::Element> + '_>> {
        None
    }
}

pub(crate) fn factorial(n: usize) -> Option<u128> {
    (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k))
}
