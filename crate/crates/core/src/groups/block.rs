use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{factorial, sample_uniform_permutation, GroupAction, Permutation, ENUMERATION_CAP};
use crate::error::{invalid, Result};

/// An element of `Λ_{K,M}`: permute the `K` blocks and, independently, the
/// `M` entries inside each block.
///
/// Position `(k, i)` (flat index `k·M + i`) is sent to
/// `(outer(k), inner[k](i))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockPermutation {
    pub outer: Permutation,
    pub inner: Vec<Permutation>,
}

impl BlockPermutation {
    pub fn identity(blocks: usize, block_size: usize) -> Self {
        Self {
            outer: Permutation::identity(blocks),
            inner: vec![Permutation::identity(block_size); blocks],
        }
    }

    pub fn blocks(&self) -> usize {
        self.outer.len()
    }

    pub fn block_size(&self) -> usize {
        self.inner.first().map_or(0, Permutation::len)
    }

    /// Image of position `(k, i)`.
    #[inline]
    pub fn apply(&self, k: usize, i: usize) -> (usize, usize) {
        (self.outer.apply(k), self.inner[k].apply(i))
    }

    /// The induced permutation of the `K·M` flat positions.
    pub fn to_permutation(&self) -> Permutation {
        let m = self.block_size();
        let mut map = vec![0; self.blocks() * m];
        for k in 0..self.blocks() {
            for i in 0..m {
                let (k2, i2) = self.apply(k, i);
                map[k * m + i] = k2 * m + i2;
            }
        }
        Permutation::from_images(map).expect("block permutation is a bijection")
    }

    pub fn compose(&self, other: &Self) -> Self {
        let outer = self.outer.compose(&other.outer);
        let inner = (0..other.blocks())
            .map(|k| self.inner[other.outer.apply(k)].compose(&other.inner[k]))
            .collect();
        Self { outer, inner }
    }

    pub fn inverse(&self) -> Self {
        let outer = self.outer.inverse();
        let inner = (0..self.blocks()).map(|k2| self.inner[outer.apply(k2)].inverse()).collect();
        Self { outer, inner }
    }

    /// Acts on a flat vector of `K·M` values.
    pub fn act<T: Clone>(&self, z: &[T]) -> Vec<T> {
        let m = self.block_size();
        assert_eq!(z.len(), self.blocks() * m, "data length does not match K·M");
        let mut out = z.to_vec();
        for k in 0..self.blocks() {
            for i in 0..m {
                let (k2, i2) = self.apply(k, i);
                out[k2 * m + i2] = z[k * m + i].clone();
            }
        }
        out
    }

    /// Acts on ragged data whose blocks all have length `M`.
    pub fn act_blocks<T: Clone>(&self, blocks: &[Vec<T>]) -> Vec<Vec<T>> {
        let mut out = blocks.to_vec();
        for (k, block) in blocks.iter().enumerate() {
            out[self.outer.apply(k)] = self.inner[k].act(block);
        }
        out
    }
}

/// Draws a uniform element of `Λ_{K,M}`.
pub fn sample_block_permutation<R: RngCore + ?Sized>(
    blocks: usize,
    block_size: usize,
    rng: &mut R,
) -> BlockPermutation {
    let outer = sample_uniform_permutation(blocks, rng);
    let inner = (0..blocks).map(|_| sample_uniform_permutation(block_size, rng)).collect();
    BlockPermutation { outer, inner }
}

/// The block-permutation group `Λ_{K,M}` acting on flat vectors of length
/// `K·M` (block `k` occupies indices `k·M .. (k+1)·M`).
#[derive(Clone, Copy, Debug)]
pub struct BlockPermutationGroup {
    pub blocks: usize,
    pub block_size: usize,
}

impl BlockPermutationGroup {
    pub fn new(blocks: usize, block_size: usize) -> Result<Self> {
        if blocks == 0 || block_size == 0 {
            return Err(invalid("block permutation group needs K ≥ 1 and M ≥ 1"));
        }
        Ok(Self { blocks, block_size })
    }

    pub fn len(&self) -> usize {
        self.blocks * self.block_size
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Representatives of the cosets of the stabilizer of the last flat
    /// position: for each `(k, i)` the element swapping block `k` with the
    /// last block and entry `i` with the last entry, so that `g⁻¹` sends the
    /// last position to `(k, i)`.
    pub fn last_entry_cosets(&self) -> Vec<BlockPermutation> {
        let (kk, mm) = (self.blocks, self.block_size);
        let mut reps = Vec::with_capacity(kk * mm);
        for k in 0..kk {
            for i in 0..mm {
                let mut g = BlockPermutation::identity(kk, mm);
                g.outer = Permutation::transposition(kk, k, kk - 1);
                g.inner[k] = Permutation::transposition(mm, i, mm - 1);
                reps.push(g);
            }
        }
        reps
    }

    fn unrank(&self, mut rank: u128) -> BlockPermutation {
        let inner_order = factorial(self.block_size).expect("block too large");
        let mut inner = Vec::with_capacity(self.blocks);
        for _ in 0..self.blocks {
            inner.push(Permutation::unrank(self.block_size, rank % inner_order));
            rank /= inner_order;
        }
        BlockPermutation { outer: Permutation::unrank(self.blocks, rank), inner }
    }
}

impl GroupAction for BlockPermutationGroup {
    type Element = BlockPermutation;
    type Point = Vec<f64>;

    fn identity(&self) -> BlockPermutation {
        BlockPermutation::identity(self.blocks, self.block_size)
    }

    fn compose(&self, g: &BlockPermutation, h: &BlockPermutation) -> BlockPermutation {
        g.compose(h)
    }

    fn inverse(&self, g: &BlockPermutation) -> BlockPermutation {
        g.inverse()
    }

    fn sample_uniform(&self, rng: &mut dyn RngCore) -> BlockPermutation {
        sample_block_permutation(self.blocks, self.block_size, rng)
    }

    fn act(&self, g: &BlockPermutation, z: &Vec<f64>) -> Vec<f64> {
        g.act(z)
    }

    /// `K!·(M!)^K`.
    fn order(&self) -> Option<u128> {
        let inner = factorial(self.block_size)?;
        (0..self.blocks).try_fold(factorial(self.blocks)?, |acc, _| acc.checked_mul(inner))
    }

    fn elements(&self) -> Option<Box<dyn Iterator<Item = BlockPermutation> + '_>> {
        let order = self.order().filter(|&o| o <= ENUMERATION_CAP)?;
        Some(Box::new((0..order).map(move |r| self.unrank(r))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn order_formula() {
        assert_eq!(BlockPermutationGroup::new(2, 2).unwrap().order(), Some(8));
        assert_eq!(BlockPermutationGroup::new(3, 3).unwrap().order(), Some(1296));
        assert_eq!(BlockPermutationGroup::new(20, 15).unwrap().order(), None);
    }

    #[test]
    fn enumeration_is_exhaustive() {
        let g = BlockPermutationGroup::new(2, 3).unwrap();
        let flat: HashSet<_> = g.elements().unwrap().map(|e| e.to_permutation()).collect();
        assert_eq!(flat.len() as u128, g.order().unwrap());
    }

    #[test]
    fn compose_and_inverse_agree_with_flat_permutations() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let z: Vec<f64> = (0..12).map(f64::from).collect();
        for _ in 0..100 {
            let g = sample_block_permutation(3, 4, &mut rng);
            let h = sample_block_permutation(3, 4, &mut rng);
            assert_eq!(g.compose(&h).to_permutation(), g.to_permutation().compose(&h.to_permutation()));
            assert_eq!(g.act(&z), g.to_permutation().act(&z));
            assert!(g.compose(&g.inverse()).to_permutation().is_identity());
        }
    }

    #[test]
    fn trivial_shapes_give_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..20 {
            assert!(sample_block_permutation(1, 1, &mut rng).to_permutation().is_identity());
        }
    }

    #[test]
    fn k2_m1_is_s2() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let draws = 20_000;
        let swaps = (0..draws)
            .filter(|_| !sample_block_permutation(2, 1, &mut rng).to_permutation().is_identity())
            .count();
        let se = (0.25 / draws as f64).sqrt();
        assert!((swaps as f64 / draws as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn k2_m2_draws_are_uniform_over_eight_elements() {
        let group = BlockPermutationGroup::new(2, 2).unwrap();
        let oracle: HashSet<_> = group.elements().unwrap().map(|e| e.to_permutation()).collect();
        assert_eq!(oracle.len(), 8);
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let draws = 80_000;
        let mut counts: HashMap<Permutation, usize> = HashMap::new();
        for _ in 0..draws {
            let p = sample_block_permutation(2, 2, &mut rng).to_permutation();
            assert!(oracle.contains(&p));
            *counts.entry(p).or_default() += 1;
        }
        assert_eq!(counts.len(), 8);
        let p = 1.0 / 8.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts.values() {
            assert!((*c as f64 / draws as f64 - p).abs() < 3.5 * se);
        }
    }

    #[test]
    fn last_entry_cosets_cover_every_position() {
        let g = BlockPermutationGroup::new(3, 2).unwrap();
        let last = g.len() - 1;
        let hit: HashSet<_> =
            g.last_entry_cosets().iter().map(|r| r.inverse().to_permutation().apply(last)).collect();
        assert_eq!(hit.len(), 6);
    }
}
