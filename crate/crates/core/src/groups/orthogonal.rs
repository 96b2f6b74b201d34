use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{sample_uniform_permutation, GroupAction, Permutation};
use crate::error::{invalid, Result};

/// A `p×p` orthogonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalMatrix {
    entries: DMatrix<f64>,
}

impl OrthogonalMatrix {
    pub fn identity(p: usize) -> Self {
        Self { entries: DMatrix::identity(p, p) }
    }

    /// Wraps a matrix after checking `QᵀQ = I` to `1e-10`.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(invalid("orthogonal matrix must be square"));
        }
        let q = Self { entries };
        if q.orthogonality_error() > 1e-10 {
            return Err(invalid("matrix is not orthogonal"));
        }
        Ok(q)
    }

    /// Rotation by `theta` radians in the plane.
    pub fn rotation_2d(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { entries: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `max |QᵀQ − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let p = self.dim();
        let gram = self.entries.transpose() * &self.entries;
        (gram - DMatrix::<f64>::identity(p, p)).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { entries: &self.entries * &other.entries }
    }

    pub fn inverse(&self) -> Self {
        Self { entries: self.entries.transpose() }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "vector dimension does not match matrix");
        (&self.entries * DVector::from_column_slice(v)).iter().copied().collect()
    }
}

/// Draws from the Haar measure on `O(p)`: QR of a standard Gaussian matrix
/// with the columns of `Q` rescaled by `sign(R_ii)`.
pub fn sample_haar_orthogonal<R: RngCore + ?Sized>(p: usize, rng: &mut R) -> Result<OrthogonalMatrix> {
    if p == 0 {
        return Err(invalid("Haar sampling needs dimension p ≥ 1"));
    }
    let gaussian = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let qr = gaussian.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(OrthogonalMatrix { entries: q })
}

/// `O(p)` acting on single vectors of `R^p`.
#[derive(Clone, Copy, Debug)]
pub struct OrthogonalGroup {
    pub dim: usize,
}

impl GroupAction for OrthogonalGroup {
    type Element = OrthogonalMatrix;
    type Point = Vec<f64>;

    fn identity(&self) -> OrthogonalMatrix {
        OrthogonalMatrix::identity(self.dim)
    }

    fn compose(&self, g: &OrthogonalMatrix, h: &OrthogonalMatrix) -> OrthogonalMatrix {
        g.compose(h)
    }

    fn inverse(&self, g: &OrthogonalMatrix) -> OrthogonalMatrix {
        g.inverse()
    }

    fn sample_uniform(&self, rng: &mut dyn RngCore) -> OrthogonalMatrix {
        sample_haar_orthogonal(self.dim, rng).expect("dimension checked at construction")
    }

    fn act(&self, g: &OrthogonalMatrix, z: &Vec<f64>) -> Vec<f64> {
        g.apply(z)
    }
}

/// `S_n × O(p)` acting on clouds of `n` points in `R^p` by
/// `(π, O)·z = (O z_{π⁻¹(1)}, …, O z_{π⁻¹(n)})`.
#[derive(Clone, Copy, Debug)]
pub struct RotationPermutationGroup {
    pub points: usize,
    pub dim: usize,
}

impl GroupAction for RotationPermutationGroup {
    type Element = (Permutation, OrthogonalMatrix);
    type Point = Vec<Vec<f64>>;

    fn identity(&self) -> Self::Element {
        (Permutation::identity(self.points), OrthogonalMatrix::identity(self.dim))
    }

    fn compose(&self, g: &Self::Element, h: &Self::Element) -> Self::Element {
        (g.0.compose(&h.0), g.1.compose(&h.1))
    }

    fn inverse(&self, g: &Self::Element) -> Self::Element {
        (g.0.inverse(), g.1.inverse())
    }

    fn sample_uniform(&self, rng: &mut dyn RngCore) -> Self::Element {
        let pi = sample_uniform_permutation(self.points, rng);
        let o = sample_haar_orthogonal(self.dim, rng).expect("dimension ≥ 1");
        (pi, o)
    }

    fn act(&self, g: &Self::Element, z: &Self::Point) -> Self::Point {
        g.0.act(z).iter().map(|v| g.1.apply(v)).collect()
    }
}
