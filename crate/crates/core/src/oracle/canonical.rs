//! Canonical labelling of Steiner points.
//!
//! In a Steiner topology every leaf is a terminal, so removing a Steiner point
//! splits the terminals into three nonempty groups. That split identifies the
//! Steiner point uniquely and does not depend on its index, which gives a
//! labelling that is invariant under any permutation of Steiner indices.

use std::collections::BTreeSet;

use crate::tree_model::{NodeRef, SteinerTopology};

/// A topology encoded with Steiner points ranked by their terminal split.
/// Two topologies are equal up to Steiner relabelling iff their canonical
/// forms are equal; the derived ordering gives a deterministic tie-break.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm {
    n: usize,
    k: usize,
    edges: Vec<(NodeRef, NodeRef)>,
}

impl CanonicalForm {
    pub fn edges(&self) -> &[(NodeRef, NodeRef)] {
        &self.edges
    }
}

type Split = Vec<Vec<usize>>;

fn steiner_split(topology: &SteinerTopology, adjacency: &[Vec<usize>], steiner: usize) -> Split {
    let n = topology.n;
    let removed = n + steiner;
    let mut groups: Split = adjacency[removed]
        .iter()
        .map(|&start| {
            let mut seen = BTreeSet::from([removed, start]);
            let mut stack = vec![start];
            let mut terminals = Vec::new();
            while let Some(v) = stack.pop() {
                if v < n {
                    terminals.push(v);
                }
                for &w in &adjacency[v] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            terminals.sort_unstable();
            terminals
        })
        .collect();
    groups.sort();
    groups
}

/// Permutation `old Steiner index -> canonical Steiner index`.
pub(crate) fn canonical_labels(topology: &SteinerTopology) -> Vec<usize> {
    let total = topology.n + topology.k;
    let mut adjacency = vec![Vec::new(); total];
    for (a, b) in topology.edges() {
        let (ia, ib) = (topology.node_id(a), topology.node_id(b));
        if ia < total && ib < total {
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
    }
    let mut keyed: Vec<(Split, usize)> = (0..topology.k)
        .map(|s| (steiner_split(topology, &adjacency, s), s))
        .collect();
    keyed.sort();
    let mut labels = vec![0; topology.k];
    for (rank, (_, s)) in keyed.into_iter().enumerate() {
        labels[s] = rank;
    }
    labels
}

fn relabel(node: NodeRef, labels: &[usize]) -> NodeRef {
    match node {
        NodeRef::Steiner(i) => NodeRef::Steiner(labels[i]),
        t => t,
    }
}

pub fn canonical_form(topology: &SteinerTopology) -> CanonicalForm {
    let labels = canonical_labels(topology);
    let mut edges: Vec<(NodeRef, NodeRef)> = topology
        .edges()
        .map(|(a, b)| {
            let (a, b) = (relabel(a, &labels), relabel(b, &labels));
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    edges.sort_unstable();
    CanonicalForm {
        n: topology.n,
        k: topology.k,
        edges,
    }
}

/// The topology with Steiner points renumbered canonically, plus the
/// permutation applied (`old index -> new index`).
pub fn canonical_topology(topology: &SteinerTopology) -> (SteinerTopology, Vec<usize>) {
    let labels = canonical_labels(topology);
    let form = canonical_form(topology);
    (
        SteinerTopology::from_edges(topology.n, topology.k, &form.edges),
        labels,
    )
}

/// True iff a relabelling of Steiner points (terminals fixed) maps one edge
/// set onto the other.
pub fn compare_topologies(a: &SteinerTopology, b: &SteinerTopology) -> bool {
    a.n == b.n && a.k == b.k && canonical_form(a) == canonical_form(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(i: usize) -> NodeRef {
        NodeRef::Terminal(i)
    }

    fn s(i: usize) -> NodeRef {
        NodeRef::Steiner(i)
    }

    fn double_y(pair_a: (usize, usize), pair_b: (usize, usize), swap: bool) -> SteinerTopology {
        let (x, y) = if swap { (1, 0) } else { (0, 1) };
        SteinerTopology::from_edges(
            4,
            2,
            &[
                (t(pair_a.0), s(x)),
                (t(pair_a.1), s(x)),
                (s(x), s(y)),
                (t(pair_b.0), s(y)),
                (t(pair_b.1), s(y)),
            ],
        )
    }

    #[test]
    fn self_and_relabelled_compare_equal() {
        let a = double_y((0, 1), (2, 3), false);
        assert!(compare_topologies(&a, &a));
        assert!(compare_topologies(&a, &double_y((0, 1), (2, 3), true)));
    }

    #[test]
    fn different_pairings_differ() {
        let horizontal = double_y((0, 1), (2, 3), false);
        let vertical = double_y((0, 3), (1, 2), false);
        assert!(!compare_topologies(&horizontal, &vertical));
    }

    #[test]
    fn canonical_topology_is_idempotent() {
        let a = double_y((2, 3), (0, 1), true);
        let (canon, labels) = canonical_topology(&a);
        assert_eq!(labels.len(), 2);
        assert_eq!(canonical_form(&canon), canonical_form(&a));
        assert_eq!(canonical_topology(&canon).0, canon);
    }

    #[test]
    fn count_mismatch_differs() {
        let a = SteinerTopology::star(3);
        let mut b = a.clone();
        b.n = 4;
        assert!(!compare_topologies(&a, &b));
    }
}
