use std::f64::consts::PI;

use super::point::Point2;
use super::topology::NodeRef;
use super::tree::{SteinerTree, TreeError};

/// Angle tolerance used for trees produced by the oracle.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-6;

const TWO_THIRDS_PI: f64 = 2.0 * PI / 3.0;

/// Edge-length and angle summary of a tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricConditionReport {
    pub min_edge_length: f64,
    /// Largest `|angle - 2π/3|` over pairs of edges meeting at a Steiner point.
    pub max_steiner_angle_deviation: f64,
    /// Smallest angle between two edges sharing a node; π when no node has
    /// two edges.
    pub min_pairwise_angle: f64,
    pub satisfies_angle_condition: bool,
}

/// Angle in `[0, π]` between two nonzero vectors.
pub fn angle_between(u: Point2, v: Point2) -> f64 {
    let cross = u.x * v.y - u.y * v.x;
    let dot = u.x * v.x + u.y * v.y;
    cross.abs().atan2(dot)
}

/// Measures the degree-independent geometric conditions of a Steiner minimal
/// tree: all edge pairs meet at no less than 2π/3 and edges at Steiner points
/// meet at exactly 2π/3.
pub fn check_geometric_conditions(
    tree: &SteinerTree,
    angle_tol: f64,
) -> Result<GeometricConditionReport, TreeError> {
    if let Some(err) = tree.degenerate_edge() {
        return Err(err);
    }
    let topo = tree.topology();
    let mut max_dev: f64 = 0.0;
    let mut min_angle = PI;

    let nodes = (0..topo.n)
        .map(NodeRef::Terminal)
        .chain((0..topo.k).map(NodeRef::Steiner));
    for node in nodes {
        let here = tree.position(node);
        let dirs: Vec<Point2> = topo
            .neighbors(node)
            .into_iter()
            .map(|w| tree.position(w) - here)
            .collect();
        for (i, &u) in dirs.iter().enumerate() {
            for &v in &dirs[i + 1..] {
                let angle = angle_between(u, v);
                min_angle = min_angle.min(angle);
                if node.is_steiner() {
                    max_dev = max_dev.max((angle - TWO_THIRDS_PI).abs());
                }
            }
        }
    }

    Ok(GeometricConditionReport {
        min_edge_length: tree.min_edge_length(),
        max_steiner_angle_deviation: max_dev,
        min_pairwise_angle: min_angle,
        satisfies_angle_condition: max_dev <= angle_tol && min_angle >= TWO_THIRDS_PI - angle_tol,
    })
}
