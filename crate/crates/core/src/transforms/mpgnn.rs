use super::hierarchical::{choose_center, leaf_residual};

/// Position of a node in the depth-two tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Root,
    Branch,
    Leaf,
}

/// Features on a depth-two rooted tree: one root, `K` first-layer nodes, and
/// the leaves under each of them. Edges join each node to its children.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeGraph {
    pub root: Vec<f64>,
    pub branches: Vec<Vec<f64>>,
    pub leaves: Vec<Vec<Vec<f64>>>,
}

impl TreeGraph {
    /// Leaves carry `(z, 0, …)` with `channels` entries; inner nodes start at
    /// zero.
    pub fn from_leaf_values(values: &[Vec<f64>], channels: usize) -> Self {
        let feature = |z: f64| {
            let mut f = vec![0.0; channels];
            f[0] = z;
            f
        };
        Self {
            root: vec![0.0; channels],
            branches: vec![vec![0.0; channels]; values.len()],
            leaves: values.iter().map(|b| b.iter().map(|&z| feature(z)).collect()).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.branches.len() + self.leaves.iter().map(Vec::len).sum::<usize>()
    }
}

/// Node update `λ0(kind, own features, summed messages)`.
pub type Lambda0 = Box<dyn Fn(NodeKind, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// Message `λ1(kind, own features, neighbor kind, neighbor features)`.
pub type Lambda1 = Box<dyn Fn(NodeKind, &[f64], NodeKind, &[f64]) -> Vec<f64> + Send + Sync>;

/// One message passing layer `z_i ← λ0(z_i, Σ_{j∈N(i)} λ1(z_i, z_j))`.
pub struct MpLayer {
    pub message_dim: usize,
    pub lambda0: Lambda0,
    pub lambda1: Lambda1,
}

impl MpLayer {
    pub fn new(message_dim: usize, lambda0: Lambda0, lambda1: Lambda1) -> Self {
        Self { message_dim, lambda0, lambda1 }
    }
}

/// Runs the layers in order. All nodes update simultaneously from the
/// previous layer's features; neighborhoods are the undirected tree edges.
pub fn mpgnn_forward(tree: &TreeGraph, layers: &[MpLayer]) -> TreeGraph {
    let mut cur = tree.clone();
    for layer in layers {
        let aggregate = |kind: NodeKind, own: &[f64], nbrs: &mut dyn Iterator<Item = (NodeKind, &Vec<f64>)>| {
            let mut acc = vec![0.0; layer.message_dim];
            for (nk, nf) in nbrs {
                let msg = (layer.lambda1)(kind, own, nk, nf);
                debug_assert_eq!(msg.len(), layer.message_dim);
                for (a, m) in acc.iter_mut().zip(&msg) {
                    *a += m;
                }
            }
            (layer.lambda0)(kind, own, &acc)
        };

        let root = aggregate(NodeKind::Root, &cur.root, &mut cur.branches.iter().map(|b| (NodeKind::Branch, b)));
        let branches: Vec<Vec<f64>> = cur
            .branches
            .iter()
            .zip(&cur.leaves)
            .map(|(b, leaves)| {
                let mut nbrs =
                    std::iter::once((NodeKind::Root, &cur.root)).chain(leaves.iter().map(|l| (NodeKind::Leaf, l)));
                aggregate(NodeKind::Branch, b, &mut nbrs)
            })
            .collect();
        let leaves: Vec<Vec<Vec<f64>>> = cur
            .leaves
            .iter()
            .zip(&cur.branches)
            .map(|(ls, parent)| {
                ls.iter()
                    .map(|l| aggregate(NodeKind::Leaf, l, &mut std::iter::once((NodeKind::Branch, parent))))
                    .collect()
            })
            .collect();
        cur = TreeGraph { root, branches, leaves };
    }
    cur
}

#[cfg(test)]
fn keep(_: NodeKind, own: &[f64], _: &[f64]) -> Vec<f64> {
    own.to_vec()
}

/// Branch mean `(Σ z, count)` gathered from the leaves into channels 0 and 1.
fn mean_layer() -> MpLayer {
    MpLayer::new(
        2,
        Box::new(|kind, own, s| match kind {
            NodeKind::Branch => vec![s[0] / s[1], s[1], 0.0, 0.0],
            _ => own.to_vec(),
        }),
        Box::new(|kind, _, nk, nf| match (kind, nk) {
            (NodeKind::Branch, NodeKind::Leaf) => vec![nf[0], 1.0],
            _ => vec![0.0, 0.0],
        }),
    )
}

/// Branch scale from squared deviations, stored in channel 2.
fn scale_layer() -> MpLayer {
    MpLayer::new(
        1,
        Box::new(|kind, own, s| match kind {
            NodeKind::Branch => {
                let n = own[1] as usize;
                let scale = if n == 1 {
                    1.0
                } else {
                    branch_scale_from_ss(s[0], n)
                };
                vec![own[0], own[1], scale, 0.0]
            }
            _ => own.to_vec(),
        }),
        Box::new(|kind, own, nk, nf| match (kind, nk) {
            (NodeKind::Branch, NodeKind::Leaf) => vec![(nf[0] - own[0]) * (nf[0] - own[0])],
            _ => vec![0.0],
        }),
    )
}

fn branch_scale_from_ss(ss: f64, n: usize) -> f64 {
    (ss / (n - 1) as f64).sqrt().max(super::SCALE_FLOOR)
}

/// Layers computing the adaptive interpolation transform. Leaves start as
/// `(z, 0, 0, 0)` and end with the score in channel 0.
pub fn interpolation_layers(c: f64) -> Vec<MpLayer> {
    vec![
        mean_layer(),
        scale_layer(),
        // root: grand mean of branch means
        MpLayer::new(
            2,
            Box::new(|kind, own, s| match kind {
                NodeKind::Root => vec![s[0] / s[1], 0.0, 0.0, 0.0],
                _ => own.to_vec(),
            }),
            Box::new(|kind, _, nk, nf| match (kind, nk) {
                (NodeKind::Root, NodeKind::Branch) => vec![nf[0], 1.0],
                _ => vec![0.0, 0.0],
            }),
        ),
        // branch: pick the center
        MpLayer::new(
            1,
            Box::new(move |kind, own, s| match kind {
                NodeKind::Branch => {
                    vec![own[0], own[1], own[2], choose_center(own[0], own[2], own[1] as usize, s[0], c)]
                }
                _ => own.to_vec(),
            }),
            Box::new(|kind, _, nk, nf| match (kind, nk) {
                (NodeKind::Branch, NodeKind::Root) => vec![nf[0]],
                _ => vec![0.0],
            }),
        ),
        // leaf: standardized deviation from the parent's center
        MpLayer::new(
            2,
            Box::new(|kind, own, s| match kind {
                NodeKind::Leaf => vec![(own[0] - s[0]).abs() / s[1], 0.0, 0.0, 0.0],
                _ => own.to_vec(),
            }),
            Box::new(|kind, _, nk, nf| match (kind, nk) {
                (NodeKind::Leaf, NodeKind::Branch) => vec![nf[3], nf[2]],
                _ => vec![0.0, 0.0],
            }),
        ),
    ]
}

/// Layers for within-branch standardization: branch means and scales act
/// as proxy statistics, and the root stays at zero.
pub fn proxy_layers() -> Vec<MpLayer> {
    vec![
        mean_layer(),
        scale_layer(),
        MpLayer::new(
            2,
            Box::new(|kind, own, s| match kind {
                NodeKind::Leaf => vec![(own[0] - s[0]).abs() / s[1], 0.0, 0.0, 0.0],
                _ => own.to_vec(),
            }),
            Box::new(|kind, _, nk, nf| match (kind, nk) {
                (NodeKind::Leaf, NodeKind::Branch) => vec![nf[0], nf[2]],
                _ => vec![0.0, 0.0],
            }),
        ),
    ]
}

/// The five supervised steps. Leaves start as `(y - μ̂_k, y - μ̂, σ̂_k)` and
/// first-layer nodes as ones; the score ends in leaf channel 0. The root is
/// never read.
pub fn five_step_layers(c: f64) -> Vec<MpLayer> {
    let none = || -> Lambda1 { Box::new(|_, _, _, _| Vec::new()) };
    vec![
        // steps 2 and 3: adaptive absolute residual on each leaf
        MpLayer::new(
            0,
            Box::new(move |kind, own, _| match kind {
                NodeKind::Leaf => {
                    let gap = own[0] - own[1];
                    let shift = if (gap / own[2]).abs() <= c { gap } else { 0.0 };
                    debug_assert_eq!((own[0] - shift).abs(), leaf_residual([own[0], own[1], own[2]], c));
                    vec![(own[0] - shift).abs(), own[1], shift]
                }
                _ => own.to_vec(),
            }),
            none(),
        ),
        // step 4: residual scale on first-layer nodes
        MpLayer::new(
            2,
            Box::new(|kind, own, s| match kind {
                NodeKind::Branch => {
                    let n = s[1] as usize;
                    let eps = if n == 1 { 1.0 } else { branch_scale_from_ss(s[0], n) };
                    vec![eps, 1.0, 1.0]
                }
                _ => own.to_vec(),
            }),
            Box::new(|kind, _, nk, nf| match (kind, nk) {
                (NodeKind::Branch, NodeKind::Leaf) => vec![nf[0] * nf[0], 1.0],
                _ => vec![0.0, 0.0],
            }),
        ),
        // step 5: divide by the parent's scale
        MpLayer::new(
            1,
            Box::new(|kind, own, s| match kind {
                NodeKind::Leaf => vec![own[0] / s[0], own[1], own[2]],
                _ => own.to_vec(),
            }),
            Box::new(|kind, _, nk, nf| match (kind, nk) {
                (NodeKind::Leaf, NodeKind::Branch) => vec![nf[0]],
                _ => vec![0.0],
            }),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(values: &[f64]) -> TreeGraph {
        TreeGraph {
            root: vec![0.0],
            branches: values.iter().map(|&v| vec![v]).collect(),
            leaves: vec![Vec::new(); values.len()],
        }
    }

    #[test]
    fn identity_network_changes_nothing() {
        let tree = TreeGraph::from_leaf_values(&[vec![1.0, 2.0], vec![3.0]], 2);
        let layers: Vec<MpLayer> =
            (0..3).map(|_| MpLayer::new(1, Box::new(keep), Box::new(|_, _, _, nf| vec![nf[0]]))).collect();
        assert_eq!(mpgnn_forward(&tree, &layers), tree);
    }

    #[test]
    fn star_center_sums_its_neighbors() {
        let layer = MpLayer::new(1, Box::new(|_, _, s| s.to_vec()), Box::new(|_, _, _, nf| vec![nf[0]]));
        let out = mpgnn_forward(&star(&[1.0, 2.0, 4.0]), &[layer]);
        assert_eq!(out.root, vec![7.0]);
        assert!(out.branches.iter().all(|b| b == &vec![0.0]));
    }

    #[test]
    fn node_count() {
        let tree = TreeGraph::from_leaf_values(&[vec![0.0; 3], vec![0.0; 3]], 1);
        assert_eq!(tree.node_count(), 1 + 2 + 6);
    }
}
