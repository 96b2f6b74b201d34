use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{factorial, GroupAction, ENUMERATION_CAP};
use crate::error::{invalid, Result};

/// A bijection of `{0, …, n-1}` stored as the image of each index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    /// Builds a permutation from its one-line image notation.
    pub fn from_images(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(invalid(format!("{map:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Self { map })
    }

    /// Swaps `i` and `j`, fixing everything else.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut p = Self::identity(n);
        p.map.swap(i, j);
        p
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// Number of indices that are moved.
    pub fn support_size(&self) -> usize {
        self.map.iter().enumerate().filter(|(i, v)| i != *v).count()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "composing permutations of different degree");
        Self { map: other.map.iter().map(|&j| self.map[j]).collect() }
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Self { map: inv }
    }

    /// Permutes the coordinates of `z`: the entry at `i` moves to `g(i)`.
    pub fn act<T: Clone>(&self, z: &[T]) -> Vec<T> {
        assert_eq!(z.len(), self.len(), "permutation degree does not match data length");
        let mut out = z.to_vec();
        for (i, v) in z.iter().enumerate() {
            out[self.map[i]] = v.clone();
        }
        out
    }

    /// Lexicographic rank in `S_n`, inverse of [`Permutation::unrank`].
    pub fn rank(&self) -> u128 {
        let n = self.map.len();
        let mut rank = 0u128;
        let mut used = vec![false; n];
        for (pos, &v) in self.map.iter().enumerate() {
            let smaller = (0..v).filter(|&u| !used[u]).count() as u128;
            rank += smaller * factorial(n - 1 - pos).unwrap_or(0);
            used[v] = true;
        }
        rank
    }

    /// The permutation of lexicographic rank `rank` in `S_n`.
    pub fn unrank(n: usize, mut rank: u128) -> Self {
        let mut pool: Vec<usize> = (0..n).collect();
        let mut map = Vec::with_capacity(n);
        for pos in 0..n {
            let f = factorial(n - 1 - pos).expect("degree too large to unrank");
            let idx = (rank / f) as usize;
            rank %= f;
            map.push(pool.remove(idx));
        }
        Self { map }
    }
}

/// Draws a uniform element of `S_n` by Fisher–Yates.
pub fn sample_uniform_permutation<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut map: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        map.swap(i, j);
    }
    Permutation { map }
}

/// The symmetric group `S_n` permuting coordinates of length-`n` vectors.
#[derive(Clone, Copy, Debug)]
pub struct SymmetricGroup {
    pub n: usize,
}

impl SymmetricGroup {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("symmetric group needs n ≥ 1"));
        }
        Ok(Self { n })
    }

    /// One transposition `(j target)` per coset of the stabilizer of
    /// `target`; the identity stands for `j = target`.
    pub fn transposition_cosets(&self, target: usize) -> Vec<Permutation> {
        (0..self.n).map(|j| Permutation::transposition(self.n, j, target)).collect()
    }
}

impl GroupAction for SymmetricGroup {
    type Element = Permutation;
    type Point = Vec<f64>;

    fn identity(&self) -> Permutation {
        Permutation::identity(self.n)
    }

    fn compose(&self, g: &Permutation, h: &Permutation) -> Permutation {
        g.compose(h)
    }

    fn inverse(&self, g: &Permutation) -> Permutation {
        g.inverse()
    }

    fn sample_uniform(&self, rng: &mut dyn RngCore) -> Permutation {
        sample_uniform_permutation(self.n, rng)
    }

    fn act(&self, g: &Permutation, z: &Vec<f64>) -> Vec<f64> {
        g.act(z)
    }

    fn order(&self) -> Option<u128> {
        factorial(self.n)
    }

    fn elements(&self) -> Option<Box<dyn Iterator<Item = Permutation> + '_>> {
        let order = self.order().filter(|&o| o <= ENUMERATION_CAP)?;
        let n = self.n;
        Some(Box::new((0..order).map(move |r| Permutation::unrank(n, r))))
    }
}

/// The one-element group acting trivially on vectors of length `n`.
#[derive(Clone, Copy, Debug)]
pub struct TrivialGroup {
    pub n: usize,
}

impl GroupAction for TrivialGroup {
    type Element = Permutation;
    type Point = Vec<f64>;

    fn identity(&self) -> Permutation {
        Permutation::identity(self.n)
    }

    fn compose(&self, _g: &Permutation, _h: &Permutation) -> Permutation {
        self.identity()
    }

    fn inverse(&self, _g: &Permutation) -> Permutation {
        self.identity()
    }

    fn sample_uniform(&self, _rng: &mut dyn RngCore) -> Permutation {
        self.identity()
    }

    fn act(&self, _g: &Permutation, z: &Vec<f64>) -> Vec<f64> {
        z.clone()
    }

    fn order(&self) -> Option<u128> {
        Some(1)
    }

    fn elements(&self) -> Option<Box<dyn Iterator<Item = Permutation> + '_>> {
        Some(Box::new(std::iter::once(self.identity())))
    }
}
