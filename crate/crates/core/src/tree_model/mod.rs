//! Terminals, Steiner points, topologies and trees, together with the
//! structural (degree, count, connectivity) and geometric (angle) checks that
//! characterise Steiner minimal trees.

mod geometry;
mod point;
mod topology;
mod tree;

pub use geometry::{angle_between, check_geometric_conditions, GeometricConditionReport, DEFAULT_ANGLE_TOL};
pub use point::{flatten, unflatten, Point2};
pub use topology::{
    steiner_forest_components, validate_topology, NodeRef, NodeRefParseError, SteinerTopology, Violation,
};
pub use tree::{tree_length, SteinerTree, TreeError, COINCIDENT_THRESHOLD};
