use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::canonical::{canonical_form, canonical_topology, CanonicalForm};
use super::enumerate::{enumerate_full_topologies, MAX_ENUMERATION_TERMINALS};
use super::optimize::{optimize_fixed_topology, DEFAULT_GRAD_TOL, MERGE_THRESHOLD};
use super::OracleError;
use crate::par::{self, Execution};
use crate::tree_model::{tree_length, NodeRef, Point2, SteinerTopology, SteinerTree, COINCIDENT_THRESHOLD};

const INIT_SEED: u64 = 0x5eed_57e1;
const INIT_JITTER: f64 = 1e-3;
/// Relative length difference below which two optima count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// A shortest tree together with any other optima of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    /// The optimum whose canonical topology encoding sorts first.
    pub tree: SteinerTree,
    pub length: f64,
    /// Further optima with distinct topologies, in canonical order.
    pub alternatives: Vec<SteinerTree>,
}

/// Places every Steiner point at the average of its neighbours (the unique
/// harmonic embedding with terminals fixed), then jitters deterministically
/// so that no two nodes start on top of each other.
pub fn initial_positions(terminals: &[Point2], topology: &SteinerTopology) -> Vec<Point2> {
    let k = topology.k;
    if k == 0 {
        return Vec::new();
    }
    let mut lap = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DMatrix::<f64>::zeros(k, 2);
    for &(t, s) in &topology.edges_ts {
        lap[(s, s)] += 1.0;
        rhs[(s, 0)] += terminals[t].x;
        rhs[(s, 1)] += terminals[t].y;
    }
    for &(a, b) in &topology.edges_s {
        lap[(a, a)] += 1.0;
        lap[(b, b)] += 1.0;
        lap[(a, b)] -= 1.0;
        lap[(b, a)] -= 1.0;
    }
    let solved = lap
        .lu()
        .solve(&rhs)
        .expect("Steiner Laplacian of a tree is nonsingular");

    let (mut lo, mut hi) = (terminals[0], terminals[0]);
    for p in terminals {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let scale = (hi - lo).norm().max(1.0) * INIT_JITTER;
    let mut rng = ChaCha8Rng::seed_from_u64(INIT_SEED);
    (0..k)
        .map(|i| {
            Point2::new(
                solved[(i, 0)] + scale * rng.gen_range(-1.0..1.0),
                solved[(i, 1)] + scale * rng.gen_range(-1.0..1.0),
            )
        })
        .collect()
}

/// Contracts edges shorter than the merge threshold. Steiner points sitting
/// on a terminal are absorbed into it; the result is revalidated and `None`
/// is returned when the contracted graph is not a Steiner topology.
pub fn canonicalize_collapses(tree: &SteinerTree) -> Option<SteinerTree> {
    let (n, k) = (tree.n(), tree.k());
    let topo = tree.topology();
    let mut parent: Vec<usize> = (0..n + k).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b, d) in tree.edge_vectors() {
        if d.norm() < MERGE_THRESHOLD {
            let (ra, rb) = (find(&mut parent, topo.node_id(a)), find(&mut parent, topo.node_id(b)));
            if ra != rb {
                // Terminal ids are below n, so the terminal stays the root.
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut new_index = vec![None; n + k];
    let mut steiner = Vec::new();
    for node in n..n + k {
        let root = find(&mut parent, node);
        if root >= n && new_index[root].is_none() {
            new_index[root] = Some(steiner.len());
            steiner.push(tree.steiner_points()[root - n]);
        }
    }
    let map = |node: NodeRef, parent: &mut [usize]| {
        let root = find(parent, topo.node_id(node));
        if root < n {
            NodeRef::Terminal(root)
        } else {
            NodeRef::Steiner(new_index[root].expect("every Steiner root is numbered"))
        }
    };
    let mut edges = Vec::new();
    for (a, b) in topo.edges() {
        let (ma, mb) = (map(a, &mut parent), map(b, &mut parent));
        if ma != mb {
            edges.push((ma, mb));
        }
    }
    let contracted = SteinerTopology::from_edges(n, steiner.len(), &edges);
    SteinerTree::new(contracted, tree.terminals().to_vec(), steiner).ok()
}

fn relabel_canonically(tree: &SteinerTree) -> SteinerTree {
    let (topology, labels) = canonical_topology(tree.topology());
    let mut steiner = vec![Point2::default(); tree.k()];
    for (old, &new) in labels.iter().enumerate() {
        steiner[new] = tree.steiner_points()[old];
    }
    SteinerTree::new(topology, tree.terminals().to_vec(), steiner)
        .expect("relabelling preserves validity")
}

fn check_terminals(terminals: &[Point2]) -> Result<(), OracleError> {
    let n = terminals.len();
    if !(2..=MAX_ENUMERATION_TERMINALS).contains(&n) {
        return Err(OracleError::TerminalCount {
            n,
            min: 2,
            max: MAX_ENUMERATION_TERMINALS,
        });
    }
    if let Some(i) = terminals.iter().position(|p| !p.is_finite()) {
        return Err(OracleError::Tree(crate::tree_model::TreeError::NonFinite {
            node: NodeRef::Terminal(i),
        }));
    }
    for i in 0..n {
        for j in i + 1..n {
            if terminals[i].distance(&terminals[j]) < COINCIDENT_THRESHOLD {
                return Err(OracleError::CoincidentTerminals { a: i, b: j });
            }
        }
    }
    Ok(())
}

/// Exact Steiner minimal tree for 2 to 6 terminals by optimising every full
/// topology. Degenerate optima collapse to non-full topologies.
pub fn solve_exact(terminals: &[Point2]) -> Result<ExactSolution, OracleError> {
    solve_exact_with(terminals, Execution::default())
}

/// [`solve_exact`] with explicit scheduling of the per-topology runs.
pub fn solve_exact_with(terminals: &[Point2], exec: Execution) -> Result<ExactSolution, OracleError> {
    check_terminals(terminals)?;
    if terminals.len() == 2 {
        let topo = SteinerTopology::from_edges(2, 0, &[(NodeRef::Terminal(0), NodeRef::Terminal(1))]);
        let tree = SteinerTree::new(topo, terminals.to_vec(), Vec::new())?;
        return Ok(ExactSolution {
            length: tree_length(&tree),
            tree,
            alternatives: Vec::new(),
        });
    }

    let topologies = enumerate_full_topologies(terminals.len())?;
    let runs = par::map(exec, &topologies, |full| -> Result<Option<SteinerTree>, OracleError> {
        let topo = full.topology();
        let init = initial_positions(terminals, topo);
        let result = optimize_fixed_topology(terminals, topo, &init, DEFAULT_GRAD_TOL)?;
        Ok(canonicalize_collapses(&result.tree).map(|t| relabel_canonically(&t)))
    });

    let mut candidates: Vec<(f64, CanonicalForm, SteinerTree)> = Vec::new();
    for run in runs {
        if let Some(tree) = run? {
            candidates.push((tree_length(&tree), canonical_form(tree.topology()), tree));
        }
    }
    let best = candidates
        .iter()
        .map(|c| c.0)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(OracleError::NoValidTopology);
    }
    let slack = TIE_TOLERANCE * best.max(1.0);
    let mut optima: Vec<(CanonicalForm, f64, SteinerTree)> = candidates
        .into_iter()
        .filter(|c| c.0 <= best + slack)
        .map(|(len, form, tree)| (form, len, tree))
        .collect();
    optima.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    optima.dedup_by(|a, b| a.0 == b.0);

    let mut iter = optima.into_iter();
    let (_, length, tree) = iter.next().expect("at least one optimum");
    Ok(ExactSolution {
        tree,
        length,
        alternatives: iter.map(|(_, _, t)| t).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::compare_topologies;
    use crate::tree_model::{check_geometric_conditions, validate_topology, DEFAULT_ANGLE_TOL};

    #[test]
    fn two_terminals_give_a_single_edge() {
        let sol = solve_exact(&[Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)]).unwrap();
        assert_eq!(sol.tree.k(), 0);
        assert_eq!(sol.length, 5.0);
    }

    #[test]
    fn example_one_has_one_steiner_point() {
        let sol =
            solve_exact(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]).unwrap();
        assert_eq!(sol.tree.k(), 1);
        let s = sol.tree.steiner_points()[0];
        assert!((s.x - 0.211).abs() < 1e-3 && (s.y - 0.211).abs() < 1e-3);
    }

    #[test]
    fn unit_square_ties_two_double_y_trees() {
        let square = [
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        let sol = solve_exact(&square).unwrap();
        assert!((sol.length - (1.0 + 3f64.sqrt())).abs() < 1e-9, "{}", sol.length);
        assert_eq!(sol.tree.k(), 2);
        assert_eq!(sol.alternatives.len(), 1);
        assert!(!compare_topologies(sol.tree.topology(), sol.alternatives[0].topology()));
        assert!(canonical_form(sol.tree.topology()) < canonical_form(sol.alternatives[0].topology()));
    }

    #[test]
    fn obtuse_triangle_is_non_full() {
        let sol =
            solve_exact(&[Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(1.0, 0.05)]).unwrap();
        assert_eq!(sol.tree.k(), 0);
        assert_eq!(validate_topology(sol.tree.topology()), Ok(()));
        assert_eq!(sol.tree.topology().degree(NodeRef::Terminal(2)), 2);
        assert!(check_geometric_conditions(&sol.tree, DEFAULT_ANGLE_TOL)
            .unwrap()
            .satisfies_angle_condition);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            solve_exact(&[Point2::default()]),
            Err(OracleError::TerminalCount { .. })
        ));
        assert!(matches!(
            solve_exact(&[Point2::default(), Point2::new(1.0, 0.0), Point2::default()]),
            Err(OracleError::CoincidentTerminals { a: 0, b: 2 })
        ));
    }

    #[test]
    fn harmonic_start_is_inside_the_hull() {
        let square = [
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        let topo = enumerate_full_topologies(4).unwrap()[0].topology().clone();
        for p in initial_positions(&square, &topo) {
            assert!(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0, "{p}");
        }
    }
}
