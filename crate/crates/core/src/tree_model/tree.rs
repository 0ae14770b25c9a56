use thiserror::Error;

use super::point::{flatten, Point2};
use super::topology::{validate_topology, NodeRef, SteinerTopology, Violation};

/// Edges shorter than this are treated as coincident nodes.
pub const COINCIDENT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("invalid topology: {}", join_violations(.0))]
    InvalidTopology(Vec<Violation>),
    #[error("expected {expected} {kind} positions, found {found}")]
    PositionCount {
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite coordinate at {node}")]
    NonFinite { node: NodeRef },
    #[error("coincident nodes: edge ({a}, {b}) has length {length:e}")]
    CoincidentNodes { a: NodeRef, b: NodeRef, length: f64 },
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A valid topology together with coordinates for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinerTree {
    topology: SteinerTopology,
    terminals: Vec<Point2>,
    steiner: Vec<Point2>,
}

impl SteinerTree {
    /// Builds a tree, validating the topology, the position counts and the
    /// finiteness of every coordinate.
    pub fn new(
        topology: SteinerTopology,
        terminals: Vec<Point2>,
        steiner: Vec<Point2>,
    ) -> Result<Self, TreeError> {
        validate_topology(&topology).map_err(TreeError::InvalidTopology)?;
        if terminals.len() != topology.n {
            return Err(TreeError::PositionCount {
                kind: "terminal",
                expected: topology.n,
                found: terminals.len(),
            });
        }
        if steiner.len() != topology.k {
            return Err(TreeError::PositionCount {
                kind: "Steiner",
                expected: topology.k,
                found: steiner.len(),
            });
        }
        if let Some(i) = terminals.iter().position(|p| !p.is_finite()) {
            return Err(TreeError::NonFinite {
                node: NodeRef::Terminal(i),
            });
        }
        if let Some(i) = steiner.iter().position(|p| !p.is_finite()) {
            return Err(TreeError::NonFinite {
                node: NodeRef::Steiner(i),
            });
        }
        Ok(Self {
            topology,
            terminals,
            steiner,
        })
    }

    pub fn topology(&self) -> &SteinerTopology {
        &self.topology
    }

    pub fn terminals(&self) -> &[Point2] {
        &self.terminals
    }

    pub fn steiner_points(&self) -> &[Point2] {
        &self.steiner
    }

    pub fn n(&self) -> usize {
        self.topology.n
    }

    pub fn k(&self) -> usize {
        self.topology.k
    }

    pub fn position(&self, node: NodeRef) -> Point2 {
        match node {
            NodeRef::Terminal(i) => self.terminals[i],
            NodeRef::Steiner(i) => self.steiner[i],
        }
    }

    /// Terminal coordinates in `(x, y)` interleaved order.
    pub fn terminal_vector(&self) -> Vec<f64> {
        flatten(&self.terminals)
    }

    /// Steiner coordinates in `(x, y)` interleaved order.
    pub fn steiner_vector(&self) -> Vec<f64> {
        flatten(&self.steiner)
    }

    /// Same topology, new coordinates. Counts and finiteness are rechecked.
    pub fn with_positions(
        &self,
        terminals: Vec<Point2>,
        steiner: Vec<Point2>,
    ) -> Result<Self, TreeError> {
        SteinerTree::new(self.topology.clone(), terminals, steiner)
    }

    /// Applies `f` to every node position.
    pub fn map_positions(&self, f: impl Fn(Point2) -> Point2) -> Result<Self, TreeError> {
        self.with_positions(
            self.terminals.iter().copied().map(&f).collect(),
            self.steiner.iter().copied().map(&f).collect(),
        )
    }

    /// Edge endpoints together with the edge vector `a - b`.
    pub fn edge_vectors(&self) -> impl Iterator<Item = (NodeRef, NodeRef, Point2)> + '_ {
        self.topology
            .edges()
            .map(|(a, b)| (a, b, self.position(a) - self.position(b)))
    }

    /// First edge shorter than [`COINCIDENT_THRESHOLD`], if any.
    pub fn degenerate_edge(&self) -> Option<TreeError> {
        self.edge_vectors().find_map(|(a, b, d)| {
            let length = d.norm();
            (length < COINCIDENT_THRESHOLD).then_some(TreeError::CoincidentNodes { a, b, length })
        })
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edge_vectors()
            .map(|(_, _, d)| d.norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Total Euclidean length of all edges.
pub fn tree_length(tree: &SteinerTree) -> f64 {
    tree.edge_vectors().map(|(_, _, d)| d.norm()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_one() -> SteinerTree {
        SteinerTree::new(
            SteinerTopology::star(3),
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![Point2::new(0.211, 0.211)],
        )
        .unwrap()
    }

    #[test]
    fn length_of_single_edge() {
        let topo = SteinerTopology::from_edges(2, 0, &[(NodeRef::Terminal(0), NodeRef::Terminal(1))]);
        let tree =
            SteinerTree::new(topo, vec![Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)], vec![]).unwrap();
        assert_eq!(tree_length(&tree), 5.0);
    }

    #[test]
    fn length_of_example_one() {
        // |s - t0| + |s - t1| + |s - t2| at the three-decimal Steiner point
        let expected = (2.0 * 0.211f64 * 0.211).sqrt() + 2.0 * (0.789f64.powi(2) + 0.211f64.powi(2)).sqrt();
        let length = tree_length(&example_one());
        assert!((length - expected).abs() < 1e-15);
        assert!((length - 1.932).abs() < 3e-3, "{length}");
    }

    #[test]
    fn rejects_mismatched_counts_and_nan() {
        let err = SteinerTree::new(SteinerTopology::star(3), vec![Point2::default(); 2], vec![Point2::default()]);
        assert!(matches!(err, Err(TreeError::PositionCount { .. })));
        let err = SteinerTree::new(
            SteinerTopology::star(3),
            vec![Point2::default(); 3],
            vec![Point2::new(f64::NAN, 0.0)],
        );
        assert_eq!(
            err,
            Err(TreeError::NonFinite {
                node: NodeRef::Steiner(0)
            })
        );
    }

    #[test]
    fn flattening_order() {
        let tree = example_one();
        assert_eq!(tree.terminal_vector(), vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(tree.steiner_vector(), vec![0.211, 0.211]);
    }
}
