//! Prediction on graphs whose data law is invariant under the graph's
//! automorphisms: a missing vertex value, a leaf of a two-layer tree, and
//! the sum over a cluster of a coarsened graph.

use serde::{Deserialize, Serialize};

use crate::calibrate::{check_alpha, keeps_unweighted, map_candidates, symmpi_set, Calibrator, CandidateGrid, PredictionSet};
use crate::error::{invalid, Error, Result};
use crate::groups::{orbit_of_index, GraphAutomorphismGroup, Orbit, Permutation, PermutationGroup};

/// Test function for vertex prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiKind {
    /// `ψ(x) = x_target`.
    LastCoordinate,
    /// `ψ(x) = x_target - mean of x over the target's orbit`.
    OrbitDeviation,
}

#[derive(Clone, Debug)]
pub struct GraphPrediction {
    pub set: PredictionSet,
    pub orbit: Orbit,
    /// The target is fixed by every automorphism, so the set is the whole
    /// grid.
    pub trivial_orbit: bool,
    /// `|H|/|G|` with `H` the stabilizer of the target.
    pub overcoverage: f64,
}

/// One automorphism `g` with `g⁻¹(target) = j` for each `j` in the orbit.
fn orbit_representatives(group: &PermutationGroup, target: usize, orbit: &Orbit) -> Vec<Permutation> {
    let mut reps: Vec<Option<Permutation>> = vec![None; orbit.len()];
    for g in group.as_slice() {
        let j = g.inverse().apply(target);
        let slot = orbit.members.binary_search(&j).expect("orbit is closed");
        if reps[slot].is_none() {
            reps[slot] = Some(g.clone());
        }
    }
    reps.into_iter().map(|g| g.expect("every orbit member is reached")).collect()
}

/// Prediction set for the value at `target` with the identity transform.
/// Entry `target` of `values` is ignored.
pub fn graph_vertex_set(
    values: &[f64],
    target: usize,
    aut: &GraphAutomorphismGroup,
    grid: &CandidateGrid,
    alpha: f64,
    psi_kind: PsiKind,
) -> Result<GraphPrediction> {
    graph_vertex_set_with(values, target, aut, grid, alpha, psi_kind, |z: &Vec<f64>| Ok(z.clone()))
}

/// As [`graph_vertex_set`] with a transform `V` that must be equivariant
/// under the automorphism group.
pub fn graph_vertex_set_with<V>(
    values: &[f64],
    target: usize,
    aut: &GraphAutomorphismGroup,
    grid: &CandidateGrid,
    alpha: f64,
    psi_kind: PsiKind,
    transform: V,
) -> Result<GraphPrediction>
where
    V: Fn(&Vec<f64>) -> Result<Vec<f64>> + Sync,
{
    check_alpha(alpha)?;
    let n = aut.vertices();
    if values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: values.len() });
    }
    if target >= n {
        return Err(invalid(format!("target vertex {target} out of range for {n} vertices")));
    }
    let orbit = orbit_of_index(aut.group(), target)?;
    let reps = orbit_representatives(aut.group(), target, &orbit);
    let cal = Calibrator::cosets(aut.group(), reps)?;
    let members = orbit.members.clone();
    let psi = move |x: &Vec<f64>| match psi_kind {
        PsiKind::LastCoordinate => x[target],
        PsiKind::OrbitDeviation => x[target] - members.iter().map(|&j| x[j]).sum::<f64>() / members.len() as f64,
    };
    let embed = |y: f64| {
        let mut z = values.to_vec();
        z[target] = y;
        z
    };
    let trivial_orbit = orbit.len() == 1;
    let mut set = symmpi_set(grid, embed, transform, psi, &cal, alpha)?;
    if trivial_orbit {
        set = PredictionSet::new(grid, set.member, true)?;
    }
    let overcoverage = orbit.stabilizer_size as f64 / orbit.group_order as f64;
    Ok(GraphPrediction { set, orbit, trivial_orbit, overcoverage })
}

/// Set for the last leaf of the last branch of a two-layer tree with score
/// `|z|`: keep `y` when `|y|` is at most the `1 - α` quantile of every leaf
/// magnitude, `|y|` included. The last branch of `leaves` lacks its target.
pub fn tree_leaf_set(leaves: &[Vec<f64>], grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    if leaves.is_empty() {
        return Err(Error::Empty("branches"));
    }
    let mut magnitudes: Vec<f64> = leaves.iter().flatten().map(|v| v.abs()).collect();
    magnitudes.push(0.0);
    let m = magnitudes.len();
    let member = map_candidates(grid.points(), |y| {
        let mut vals = magnitudes.clone();
        vals[m - 1] = y.abs();
        Ok(keeps_unweighted(&vals, y.abs(), 1.0 - alpha))
    })?;
    let unbounded = crate::calibrate::quantile_rank(1.0 - alpha, m) >= m;
    PredictionSet::new(grid, member, unbounded)
}

/// A graph with vertices merged into clusters; `multi[a][b]` counts the
/// edge weight between clusters `a` and `b`, and `multi[a][a]` the weight
/// inside cluster `a`, self-loops included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarsenedGraph {
    pub assignment: Vec<usize>,
    pub multi: Vec<Vec<f64>>,
}

impl CoarsenedGraph {
    pub fn clusters(&self) -> usize {
        self.multi.len()
    }

    /// Sum of all edge weights, each undirected edge once.
    pub fn total_weight(&self) -> f64 {
        let c = self.multi.len();
        (0..c).map(|a| (a..c).map(|b| self.multi[a][b]).sum::<f64>()).sum()
    }
}

/// Total edge weight of an adjacency matrix, each undirected edge once.
pub fn total_edge_weight(adjacency: &[Vec<f64>]) -> f64 {
    let n = adjacency.len();
    (0..n).map(|i| (i..n).map(|j| adjacency[i][j]).sum::<f64>()).sum()
}

/// Merges vertex `i` into cluster `clusters[i]`. Cluster labels must be
/// `0..C` with every label used.
pub fn coarsen_graph(adjacency: &[Vec<f64>], clusters: &[usize]) -> Result<CoarsenedGraph> {
    let n = adjacency.len();
    if n == 0 {
        return Err(Error::Empty("adjacency matrix"));
    }
    if clusters.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: clusters.len() });
    }
    if let Some(row) = adjacency.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: row.len() });
    }
    for i in 0..n {
        for j in 0..i {
            if adjacency[i][j] != adjacency[j][i] {
                return Err(Error::NonSymmetric { row: i, col: j });
            }
        }
    }
    let c = clusters.iter().max().map_or(0, |m| m + 1);
    let mut used = vec![false; c];
    clusters.iter().for_each(|&k| used[k] = true);
    if let Some(k) = used.iter().position(|u| !u) {
        return Err(invalid(format!("cluster labels must form a partition 0..{c}; label {k} is unused")));
    }
    let mut multi = vec![vec![0.0; c]; c];
    for i in 0..n {
        for j in i..n {
            let w = adjacency[i][j];
            if w == 0.0 {
                continue;
            }
            let (a, b) = (clusters[i], clusters[j]);
            multi[a][b] += w;
            if a != b {
                multi[b][a] += w;
            }
        }
    }
    Ok(CoarsenedGraph { assignment: clusters.to_vec(), multi })
}

/// Branch totals `node_k + Σ leaves_k` of a two-layer tree.
pub fn cluster_sums(branch_nodes: &[f64], leaves: &[Vec<f64>]) -> Result<Vec<f64>> {
    if branch_nodes.len() != leaves.len() {
        return Err(Error::DimensionMismatch { expected: branch_nodes.len(), got: leaves.len() });
    }
    Ok(branch_nodes.iter().zip(leaves).map(|(v, l)| v + l.iter().sum::<f64>()).collect())
}

/// Set for the total of the last cluster given the other `K - 1` totals:
/// keep `s` when `|s|` is at most the `1 - α` quantile of all `K` total
/// magnitudes.
pub fn cluster_sum_set(observed_sums: &[f64], grid: &CandidateGrid, alpha: f64) -> Result<PredictionSet> {
    let leaves: Vec<Vec<f64>> = observed_sums.iter().map(|&s| vec![s]).chain(std::iter::once(Vec::new())).collect();
    tree_leaf_set(&leaves, grid, alpha)
}

/// Turns a set for a cluster total into a set for its single missing node
/// by subtracting the observed labels of the cluster.
pub fn back_out(set: &PredictionSet, observed_in_cluster: f64) -> PredictionSet {
    PredictionSet {
        candidates: set.candidates.iter().map(|s| s - observed_in_cluster).collect(),
        member: set.member.clone(),
        spacing: set.spacing,
        unbounded: set.unbounded,
    }
}
