use std::collections::HashSet;

use super::canonical::canonical_form;
use super::OracleError;
use crate::tree_model::{NodeRef, SteinerTopology};

pub const MIN_ENUMERATION_TERMINALS: usize = 3;
pub const MAX_ENUMERATION_TERMINALS: usize = 6;

/// A topology with `k = n - 2`, every terminal a leaf and every Steiner point
/// of degree three.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullTopology(SteinerTopology);

impl FullTopology {
    /// Wraps `topology` if it has the full-topology degree pattern.
    pub fn new(topology: SteinerTopology) -> Option<Self> {
        let full = topology.n >= 2
            && topology.k + 2 == topology.n
            && topology.edges_t.is_empty()
            && crate::tree_model::validate_topology(&topology).is_ok()
            && (0..topology.n).all(|t| topology.degree(NodeRef::Terminal(t)) == 1);
        full.then_some(FullTopology(topology))
    }

    pub fn topology(&self) -> &SteinerTopology {
        &self.0
    }

    pub fn into_topology(self) -> SteinerTopology {
        self.0
    }
}

/// Grows every full topology on `n` terminals by inserting terminal `j` on
/// each edge of every topology on `j` terminals. Yields (2n-5)!! topologies.
pub fn enumerate_full_topologies(n: usize) -> Result<Vec<FullTopology>, OracleError> {
    if !(MIN_ENUMERATION_TERMINALS..=MAX_ENUMERATION_TERMINALS).contains(&n) {
        return Err(OracleError::TerminalCount {
            n,
            min: MIN_ENUMERATION_TERMINALS,
            max: MAX_ENUMERATION_TERMINALS,
        });
    }
    let mut level = vec![SteinerTopology::star(3)];
    for j in 3..n {
        let mut next = Vec::with_capacity(level.len() * (2 * j - 3));
        for topo in &level {
            let edges: Vec<(NodeRef, NodeRef)> = topo.edges().collect();
            let fresh = NodeRef::Steiner(topo.k);
            for split in 0..edges.len() {
                let mut grown: Vec<(NodeRef, NodeRef)> = Vec::with_capacity(edges.len() + 2);
                for (i, &(a, b)) in edges.iter().enumerate() {
                    if i == split {
                        grown.push((a, fresh));
                        grown.push((fresh, b));
                    } else {
                        grown.push((a, b));
                    }
                }
                grown.push((NodeRef::Terminal(j), fresh));
                next.push(SteinerTopology::from_edges(j + 1, topo.k + 1, &grown));
            }
        }
        level = next;
    }

    let mut seen = HashSet::new();
    Ok(level
        .into_iter()
        .filter(|topo| seen.insert(canonical_form(topo)))
        .map(|topo| FullTopology::new(topo).expect("insertion preserves the full degree pattern"))
        .collect())
}
