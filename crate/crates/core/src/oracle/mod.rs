//! Ground truth for small instances: fixed-topology minimisation and exact
//! Steiner minimal trees by exhaustive search over full topologies.

mod canonical;
mod enumerate;
mod exact;
mod optimize;

use thiserror::Error;

pub use canonical::{canonical_form, canonical_topology, compare_topologies, CanonicalForm};
pub use enumerate::{
    enumerate_full_topologies, FullTopology, MAX_ENUMERATION_TERMINALS, MIN_ENUMERATION_TERMINALS,
};
pub use exact::{canonicalize_collapses, initial_positions, solve_exact, solve_exact_with, ExactSolution, TIE_TOLERANCE};
pub use optimize::{
    optimize_fixed_topology, OptimizeResult, OptimizeStatus, DEFAULT_GRAD_TOL, MAX_ITERATIONS, MERGE_THRESHOLD,
    SMOOTHING,
};

use crate::tree_model::TreeError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("terminal count {n} outside the supported range {min}..={max}")]
    TerminalCount { n: usize, min: usize, max: usize },
    #[error("coincident terminals t{a} and t{b}")]
    CoincidentTerminals { a: usize, b: usize },
    #[error("gradient tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("no full topology produced a valid tree")]
    NoValidTopology,
    #[error(transparent)]
    Tree(#[from] TreeError),
}
