use std::collections::HashMap;

use super::GroupAction;
use crate::error::{Error, Result};

/// Classes of group elements with equal induced maps `ℓ_g = ψ ∘ ρ̃(g)`.
///
/// For a subgroup `H = {g : ℓ_g = ℓ_e}` the classes are the cosets of `H`,
/// and the group quantile only depends on one representative per class.
#[derive(Clone, Debug)]
pub struct CosetDecomposition<E> {
    pub subgroup_size: usize,
    pub group_order: usize,
    pub representatives: Vec<E>,
    pub class_sizes: Vec<usize>,
}

impl<E> CosetDecomposition<E> {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    /// `|H| / |G|`.
    pub fn overcoverage_ratio(&self) -> f64 {
        self.subgroup_size as f64 / self.group_order as f64
    }

    /// True when every class has the size of the identity class, as cosets
    /// must.
    pub fn is_uniform(&self) -> bool {
        self.class_sizes.iter().all(|&s| s == self.subgroup_size)
    }
}

/// Partitions `elements` with a caller-supplied equivalence. The first
/// element must be the identity; its class size is reported as `|H|`.
pub fn coset_representatives<E, I, F>(elements: I, same_class: F) -> Result<CosetDecomposition<E>>
where
    I: IntoIterator<Item = E>,
    F: Fn(&E, &E) -> bool,
{
    let mut representatives: Vec<E> = Vec::new();
    let mut class_sizes: Vec<usize> = Vec::new();
    let mut group_order = 0;
    for g in elements {
        group_order += 1;
        match representatives.iter().position(|r| same_class(r, &g)) {
            Some(idx) => class_sizes[idx] += 1,
            None => {
                representatives.push(g);
                class_sizes.push(1);
            }
        }
    }
    if group_order == 0 {
        return Err(Error::Empty("group elements"));
    }
    Ok(CosetDecomposition { subgroup_size: class_sizes[0], group_order, representatives, class_sizes })
}

/// Groups elements by the values `ψ(ρ̃(g) p)` over every probe point `p`.
/// Two elements share a class when those value vectors agree bit for bit.
pub fn coset_representatives_by_probe<A, F>(
    action: &A,
    psi: F,
    probes: &[A::Point],
) -> Result<CosetDecomposition<A::Element>>
where
    A: GroupAction,
    F: Fn(&A::Point) -> f64,
{
    if probes.is_empty() {
        return Err(Error::Empty("probe set"));
    }
    let elements = action
        .elements()
        .ok_or_else(|| Error::NotEnumerable("coset decomposition needs an enumerable group".into()))?;
    let signature = |g: &A::Element| -> Vec<u64> { probes.iter().map(|p| psi(&action.act(g, p)).to_bits()).collect() };

    let id = action.identity();
    let id_key = signature(&id);
    let mut index: HashMap<Vec<u64>, usize> = HashMap::from([(id_key, 0)]);
    let mut representatives = vec![id];
    let mut class_sizes = vec![0usize];
    let mut group_order = 0;
    for g in elements {
        group_order += 1;
        let key = signature(&g);
        match index.get(&key) {
            Some(&idx) => class_sizes[idx] += 1,
            None => {
                index.insert(key, representatives.len());
                representatives.push(g);
                class_sizes.push(1);
            }
        }
    }
    Ok(CosetDecomposition { subgroup_size: class_sizes[0], group_order, representatives, class_sizes })
}
