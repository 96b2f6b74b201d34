use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::{Rng, RngCore};

use super::{BlockPermutation, GroupAction, Permutation};
use crate::error::{invalid, Error, Result};

/// Default vertex count up to which automorphisms are found by exhaustive
/// backtracking.
pub const AUTOMORPHISM_CAP: usize = 10;

/// Largest group that generator closure will materialise.
const CLOSURE_CAP: usize = 2_000_000;

/// Elements that move flat indices around.
pub trait IndexMap {
    fn image(&self, i: usize) -> usize;
}

impl IndexMap for Permutation {
    fn image(&self, i: usize) -> usize {
        self.apply(i)
    }
}

impl IndexMap for BlockPermutation {
    fn image(&self, i: usize) -> usize {
        let m = self.block_size();
        let (k, j) = self.apply(i / m, i % m);
        k * m + j
    }
}

/// A finite permutation group stored as an explicit element list.
#[derive(Clone, Debug)]
pub struct PermutationGroup {
    degree: usize,
    elements: Vec<Permutation>,
}

impl PermutationGroup {
    /// Wraps a list that must already be a group (contains the identity and
    /// is closed under composition); closure is not re-checked here.
    pub fn from_elements(degree: usize, elements: Vec<Permutation>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Empty("permutation group elements"));
        }
        if let Some(bad) = elements.iter().find(|g| g.len() != degree) {
            return Err(Error::DimensionMismatch { expected: degree, got: bad.len() });
        }
        Ok(Self { degree, elements })
    }

    /// The group generated by `generators`, built by breadth-first closure.
    pub fn generated_by(degree: usize, generators: &[Permutation]) -> Result<Self> {
        if let Some(bad) = generators.iter().find(|g| g.len() != degree) {
            return Err(Error::DimensionMismatch { expected: degree, got: bad.len() });
        }
        let id = Permutation::identity(degree);
        let mut seen: HashSet<Permutation> = HashSet::from([id.clone()]);
        let mut queue = VecDeque::from([id]);
        let mut elements = Vec::new();
        while let Some(g) = queue.pop_front() {
            for s in generators {
                let h = s.compose(&g);
                if seen.insert(h.clone()) {
                    if seen.len() > CLOSURE_CAP {
                        return Err(invalid(format!("generated group exceeds {CLOSURE_CAP} elements")));
                    }
                    queue.push_back(h);
                }
            }
            elements.push(g);
        }
        Ok(Self { degree, elements })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn as_slice(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn contains(&self, g: &Permutation) -> bool {
        self.elements.contains(g)
    }
}

impl GroupAction for PermutationGroup {
    type Element = Permutation;
    type Point = Vec<f64>;

    fn identity(&self) -> Permutation {
        Permutation::identity(self.degree)
    }

    fn compose(&self, g: &Permutation, h: &Permutation) -> Permutation {
        g.compose(h)
    }

    fn inverse(&self, g: &Permutation) -> Permutation {
        g.inverse()
    }

    fn sample_uniform(&self, rng: &mut dyn RngCore) -> Permutation {
        self.elements[rng.random_range(0..self.elements.len())].clone()
    }

    fn act(&self, g: &Permutation, z: &Vec<f64>) -> Vec<f64> {
        g.act(z)
    }

    fn order(&self) -> Option<u128> {
        Some(self.elements.len() as u128)
    }

    fn elements(&self) -> Option<Box<dyn Iterator<Item = Permutation> + '_>> {
        Some(Box::new(self.elements.iter().cloned()))
    }
}

/// The automorphism group of a weighted undirected graph: all relabelings
/// `g` with `A[g(i)][g(j)] = A[i][j]`.
#[derive(Clone, Debug)]
pub struct GraphAutomorphismGroup {
    adjacency: Vec<Vec<f64>>,
    group: PermutationGroup,
}

impl GraphAutomorphismGroup {
    /// Builds the group from a generator list, for graphs beyond the
    /// brute-force cap. Every generator must preserve the adjacency.
    pub fn from_generators(adjacency: Vec<Vec<f64>>, generators: &[Permutation]) -> Result<Self> {
        check_symmetric(&adjacency)?;
        for g in generators {
            if !preserves(&adjacency, g) {
                return Err(invalid(format!("generator {:?} is not an automorphism", g.images())));
            }
        }
        let group = PermutationGroup::generated_by(adjacency.len(), generators)?;
        Ok(Self { adjacency, group })
    }

    pub fn adjacency(&self) -> &[Vec<f64>] {
        &self.adjacency
    }

    pub fn vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn group(&self) -> &PermutationGroup {
        &self.group
    }

    pub fn elements(&self) -> &[Permutation] {
        self.group.as_slice()
    }

    pub fn len(&self) -> usize {
        self.group.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group.is_empty()
    }

    /// True when `g` maps the graph onto itself.
    pub fn is_automorphism(&self, g: &Permutation) -> bool {
        preserves(&self.adjacency, g)
    }
}

fn check_symmetric(a: &[Vec<f64>]) -> Result<()> {
    let n = a.len();
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        for j in 0..i {
            if a[i][j] != a[j][i] {
                return Err(Error::NonSymmetric { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn preserves(a: &[Vec<f64>], g: &Permutation) -> bool {
    let n = a.len();
    g.len() == n && (0..n).all(|i| (0..n).all(|j| a[g.apply(i)][g.apply(j)] == a[i][j]))
}

/// Finds every automorphism of a graph with at most [`AUTOMORPHISM_CAP`]
/// vertices.
pub fn enumerate_automorphisms(adjacency: &[Vec<f64>]) -> Result<GraphAutomorphismGroup> {
    enumerate_automorphisms_with_cap(adjacency, AUTOMORPHISM_CAP)
}

/// Backtracking search over vertex assignments. A vertex may only map to a
/// vertex with the same self-loop weight and the same sorted multiset of
/// edge weights, and each new assignment must agree with all earlier ones.
pub fn enumerate_automorphisms_with_cap(adjacency: &[Vec<f64>], cap: usize) -> Result<GraphAutomorphismGroup> {
    check_symmetric(adjacency)?;
    let n = adjacency.len();
    if n == 0 {
        return Err(Error::Empty("adjacency matrix"));
    }
    if n > cap {
        return Err(invalid(format!(
            "graph has {n} vertices, above the brute-force cap of {cap}; supply generators instead"
        )));
    }
    let signature: Vec<Vec<u64>> = adjacency
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut s: Vec<u64> = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w.to_bits()).collect();
            s.sort_unstable();
            s.push(row[i].to_bits());
            s
        })
        .collect();

    let mut found = Vec::new();
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    backtrack(adjacency, &signature, 0, &mut image, &mut used, &mut found);
    let group = PermutationGroup::from_elements(n, found)?;
    Ok(GraphAutomorphismGroup { adjacency: adjacency.to_vec(), group })
}

fn backtrack(
    a: &[Vec<f64>],
    signature: &[Vec<u64>],
    vertex: usize,
    image: &mut Vec<usize>,
    used: &mut Vec<bool>,
    found: &mut Vec<Permutation>,
) {
    let n = a.len();
    if vertex == n {
        found.push(Permutation::from_images(image.clone()).expect("assignment is a bijection"));
        return;
    }
    for target in 0..n {
        if used[target] || signature[target] != signature[vertex] {
            continue;
        }
        let consistent = (0..vertex).all(|u| a[image[u]][target] == a[u][vertex]);
        if !consistent {
            continue;
        }
        image[vertex] = target;
        used[target] = true;
        backtrack(a, signature, vertex + 1, image, used, found);
        used[target] = false;
    }
    image[vertex] = usize::MAX;
}

/// Orbit `{g(i)}` of an index together with the size of its stabilizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orbit {
    pub members: Vec<usize>,
    pub stabilizer_size: usize,
    pub group_order: usize,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }
}

/// Orbit and stabilizer of index `i` under a finite group of index maps.
pub fn orbit_of_index<G>(group: &G, i: usize) -> Result<Orbit>
where
    G: GroupAction,
    G::Element: IndexMap,
{
    let elements = group
        .elements()
        .ok_or_else(|| Error::NotEnumerable("orbit computation needs a finite enumerable group".into()))?;
    let mut members = BTreeSet::new();
    let mut stabilizer_size = 0;
    let mut group_order = 0;
    for g in elements {
        let j = g.image(i);
        members.insert(j);
        stabilizer_size += usize::from(j == i);
        group_order += 1;
    }
    Ok(Orbit { members: members.into_iter().collect(), stabilizer_size, group_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::SymmetricGroup;

    fn from_edges(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n]; n];
        for &(u, v) in edges {
            a[u][v] = 1.0;
            a[v][u] = 1.0;
        }
        a
    }

    fn brute_force(a: &[Vec<f64>]) -> HashSet<Permutation> {
        SymmetricGroup::new(a.len()).unwrap().elements().unwrap().filter(|g| preserves(a, g)).collect()
    }

    #[test]
    fn edgeless_graph_has_full_symmetric_group() {
        let aut = enumerate_automorphisms(&from_edges(3, &[])).unwrap();
        assert_eq!(aut.len(), 6);
    }

    #[test]
    fn path_p3_swaps_endpoints_only() {
        let a = from_edges(3, &[(0, 1), (1, 2)]);
        let aut = enumerate_automorphisms(&a).unwrap();
        let got: HashSet<_> = aut.elements().iter().cloned().collect();
        assert_eq!(got, brute_force(&a));
        assert_eq!(got, HashSet::from([Permutation::identity(3), Permutation::transposition(3, 0, 2)]));
    }

    #[test]
    fn cycle_c4_is_dihedral() {
        let a = from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let aut = enumerate_automorphisms(&a).unwrap();
        assert_eq!(aut.len(), 8);
        assert_eq!(aut.elements().iter().cloned().collect::<HashSet<_>>(), brute_force(&a));
    }

    #[test]
    fn weighted_edges_must_match_exactly() {
        let mut a = from_edges(3, &[(0, 1), (1, 2)]);
        a[0][1] = 2.0;
        a[1][0] = 2.0;
        assert_eq!(enumerate_automorphisms(&a).unwrap().len(), 1);
    }

    #[test]
    fn rejects_asymmetric_and_oversized_inputs() {
        let mut a = from_edges(3, &[(0, 1)]);
        a[0][1] = 0.5;
        assert!(matches!(enumerate_automorphisms(&a), Err(Error::NonSymmetric { .. })));
        assert!(enumerate_automorphisms(&from_edges(11, &[])).is_err());
    }

    #[test]
    fn generator_closure_matches_enumeration() {
        let a = from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        let rot = Permutation::from_images(vec![1, 2, 3, 4, 5, 0]).unwrap();
        let refl = Permutation::from_images(vec![0, 5, 4, 3, 2, 1]).unwrap();
        let from_gens = GraphAutomorphismGroup::from_generators(a.clone(), &[rot, refl]).unwrap();
        let full = enumerate_automorphisms(&a).unwrap();
        let x: HashSet<_> = from_gens.elements().iter().cloned().collect();
        let y: HashSet<_> = full.elements().iter().cloned().collect();
        assert_eq!(x, y);
        assert_eq!(x.len(), 12);
        let bogus = Permutation::from_images(vec![1, 0, 2, 3, 4, 5]).unwrap();
        assert!(GraphAutomorphismGroup::from_generators(a, &[bogus]).is_err());
    }

    #[test]
    fn orbits_and_stabilizers() {
        let s4 = SymmetricGroup::new(4).unwrap();
        let orbit = orbit_of_index(&s4, 3).unwrap();
        assert_eq!(orbit.members, vec![0, 1, 2, 3]);

        let p3 = enumerate_automorphisms(&from_edges(3, &[(0, 1), (1, 2)])).unwrap();
        let centre = orbit_of_index(p3.group(), 1).unwrap();
        assert_eq!(centre.members, vec![1]);
        assert_eq!(centre.stabilizer_size, 2);

        let c4 = enumerate_automorphisms(&from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])).unwrap();
        for i in 0..4 {
            let o = orbit_of_index(c4.group(), i).unwrap();
            assert_eq!(o.len(), 4);
            assert_eq!(o.stabilizer_size, 2);
        }
    }

    #[test]
    fn closure_under_composition_and_inverse() {
        let graphs = [
            from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]),
            from_edges(6, &[(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)]),
            from_edges(8, &[(0, 1), (2, 3), (4, 5), (6, 7)]),
        ];
        for a in &graphs {
            let aut = enumerate_automorphisms(a).unwrap();
            let set: HashSet<_> = aut.elements().iter().cloned().collect();
            for g in aut.elements() {
                assert!(set.contains(&g.inverse()));
                for h in aut.elements() {
                    assert!(set.contains(&g.compose(h)));
                }
                let o = orbit_of_index(aut.group(), 0).unwrap();
                assert_eq!(o.len() * o.stabilizer_size, aut.len());
            }
        }
    }
}
