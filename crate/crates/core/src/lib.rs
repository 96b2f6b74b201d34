//! Predictive inference for data with distributional symmetry.
//!
//! Given data whose law is invariant under a group `G` acting on it, a
//! distributionally equivariant transform `V`, and a scalar test function
//! `ψ`, the prediction set keeps every completion `z` of the observed data
//! for which `ψ(V(z))` does not exceed the `1 - α` quantile of
//! `ψ(ρ̃(g) V(z))` over uniformly drawn `g`. Exchangeable data under the
//! symmetric group recovers classical conformal prediction; the
//! block-permutation group gives sets for two-layer hierarchical data, graph
//! automorphisms give sets on networks, and rotations give sets for
//! rotation-invariant point clouds.
//!
//! Module map:
//!
//! - [`groups`]: permutations, block permutations, Haar orthogonal matrices,
//!   graph automorphisms, orbits and cosets.
//! - [`transforms`]: conformal scores, hierarchical transforms, message
//!   passing on trees, linear regressors and an equivariance checker.
//! - [`calibrate`]: thresholds and prediction sets (deterministic,
//!   randomized, Monte Carlo, weighted, random sample sizes).
//! - [`baselines`]: single-branch, split conformal and subsampling sets.
//! - [`network`]: vertex and cluster prediction on graphs.
//! - [`sim`]: data generators, rotational regions and the benchmark harness.
//! - [`io`]: CSV/JSON readers and writers.

pub mod baselines;
pub mod calibrate;
pub mod error;
pub mod groups;
pub mod io;
pub mod network;
pub mod sim;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};

/// Default interpolation constant for hierarchical transforms.
pub const DEFAULT_C: f64 = 2.0;

/// Tolerance used when comparing cumulative weights against a level.
pub(crate) const LEVEL_EPS: f64 = 1e-12;
