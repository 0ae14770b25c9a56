//! Analytic derivatives of the total tree length `J(t, s)`.
//!
//! All vectors and matrices use the interleaved coordinate order
//! `(x0, y0, x1, y1, ...)` with terminals and Steiner points in index order.
//! Every edge contributes through the same 2×2 building block, the scaled
//! perpendicular projector returned by [`edge_projection`]:
//!
//! ```text
//! P(u) = (1/|u|) (I - u uᵀ / |u|²)
//! ```
//!
//! Terminal–terminal edges carry no Steiner coordinate and so never appear in
//! the Steiner gradient, the Hessian or the mixed partial.

mod block;

use nalgebra::{DVector, Matrix2, Vector2};
use thiserror::Error;

pub use block::BlockMatrix2;

use crate::tree_model::{NodeRef, Point2, SteinerTree, COINCIDENT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DerivativeError {
    #[error("degenerate edge: vector length {length:e} is below the coincident-node threshold")]
    DegenerateVector { length: f64 },
    #[error("degenerate edge ({a}, {b}): length {length:e}")]
    DegenerateEdge { a: NodeRef, b: NodeRef, length: f64 },
}

/// The scaled perpendicular projector `(1/|u|)(I - u uᵀ/|u|²)`.
///
/// Symmetric, nonnegative definite, of rank one, and annihilates `u`.
pub fn edge_projection(u: Point2) -> Result<Matrix2<f64>, DerivativeError> {
    let length = u.norm();
    if length < COINCIDENT_THRESHOLD {
        return Err(DerivativeError::DegenerateVector { length });
    }
    Ok(projection_unchecked(u.to_vector(), length))
}

fn projection_unchecked(u: Vector2<f64>, length: f64) -> Matrix2<f64> {
    let unit = u / length;
    (Matrix2::identity() - unit * unit.transpose()) / length
}

fn ensure_nondegenerate(tree: &SteinerTree) -> Result<(), DerivativeError> {
    for (a, b, d) in tree.edge_vectors() {
        let length = d.norm();
        if length < COINCIDENT_THRESHOLD {
            return Err(DerivativeError::DegenerateEdge { a, b, length });
        }
    }
    Ok(())
}

/// Terminal–Steiner edges as `(terminal, steiner, s - t)`.
fn ts_vectors(tree: &SteinerTree) -> impl Iterator<Item = (usize, usize, Point2)> + '_ {
    tree.topology()
        .edges_ts
        .iter()
        .map(|&(t, s)| (t, s, tree.steiner_points()[s] - tree.terminals()[t]))
}

/// Steiner–Steiner edges as `(a, b, s_a - s_b)`.
fn ss_vectors(tree: &SteinerTree) -> impl Iterator<Item = (usize, usize, Point2)> + '_ {
    let s = tree.steiner_points();
    tree.topology()
        .edges_s
        .iter()
        .map(move |&(a, b)| (a, b, s[a] - s[b]))
}

/// Total tree length `J(t, s)`.
pub fn cost(tree: &SteinerTree) -> Result<f64, DerivativeError> {
    ensure_nondegenerate(tree)?;
    Ok(crate::tree_model::tree_length(tree))
}

/// `∂J/∂s`: for each Steiner point, the sum of unit vectors pointing from its
/// neighbours towards it.
pub fn gradient_s(tree: &SteinerTree) -> Result<DVector<f64>, DerivativeError> {
    ensure_nondegenerate(tree)?;
    let mut grad = DVector::zeros(2 * tree.k());
    for (_, s, d) in ts_vectors(tree) {
        let unit = d.to_vector() / d.norm();
        let mut seg = grad.fixed_rows_mut::<2>(2 * s);
        seg += unit;
    }
    for (a, b, d) in ss_vectors(tree) {
        let unit = d.to_vector() / d.norm();
        {
            let mut seg = grad.fixed_rows_mut::<2>(2 * a);
            seg += unit;
        }
        let mut seg = grad.fixed_rows_mut::<2>(2 * b);
        seg -= unit;
    }
    Ok(grad)
}

/// `∂²J/∂s²` as a k×k block matrix. Off-diagonal blocks are stored exactly
/// for the Steiner–Steiner edges.
pub fn hessian_ss(tree: &SteinerTree) -> Result<BlockMatrix2, DerivativeError> {
    ensure_nondegenerate(tree)?;
    let k = tree.k();
    let mut hess = BlockMatrix2::zeros(k, k);
    for i in 0..k {
        hess.add_block(i, i, Matrix2::zeros());
    }
    for (_, s, d) in ts_vectors(tree) {
        hess.add_block(s, s, projection_unchecked(d.to_vector(), d.norm()));
    }
    for (a, b, d) in ss_vectors(tree) {
        let p = projection_unchecked(d.to_vector(), d.norm());
        hess.add_block(a, a, p);
        hess.add_block(b, b, p);
        hess.add_block(a, b, -p);
        hess.add_block(b, a, -p);
    }
    Ok(hess)
}

/// `∂²J/∂t∂s` as a k×n block matrix; block `(i, j)` is stored exactly when
/// terminal `j` is adjacent to Steiner point `i`.
pub fn mixed_ts(tree: &SteinerTree) -> Result<BlockMatrix2, DerivativeError> {
    ensure_nondegenerate(tree)?;
    let mut mixed = BlockMatrix2::zeros(tree.k(), tree.n());
    for (t, s, d) in ts_vectors(tree) {
        mixed.add_block(s, t, -projection_unchecked(d.to_vector(), d.norm()));
    }
    Ok(mixed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTermKind {
    /// Terminal–Steiner edge.
    K,
    /// Steiner–Steiner edge.
    L,
}

/// One edge's contribution to the Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTerm {
    pub kind: EdgeTermKind,
    pub edge: (NodeRef, NodeRef),
    pub contribution: BlockMatrix2,
}

/// Splits the Hessian into one summand per terminal–Steiner and
/// Steiner–Steiner edge.
pub fn edge_terms(tree: &SteinerTree) -> Result<Vec<EdgeTerm>, DerivativeError> {
    ensure_nondegenerate(tree)?;
    let k = tree.k();
    let mut terms = Vec::with_capacity(tree.topology().edges_ts.len() + tree.topology().edges_s.len());
    for (t, s, d) in ts_vectors(tree) {
        let mut contribution = BlockMatrix2::zeros(k, k);
        contribution.add_block(s, s, projection_unchecked(d.to_vector(), d.norm()));
        terms.push(EdgeTerm {
            kind: EdgeTermKind::K,
            edge: (NodeRef::Terminal(t), NodeRef::Steiner(s)),
            contribution,
        });
    }
    for (a, b, d) in ss_vectors(tree) {
        let p = projection_unchecked(d.to_vector(), d.norm());
        let mut contribution = BlockMatrix2::zeros(k, k);
        contribution.add_block(a, a, p);
        contribution.add_block(b, b, p);
        contribution.add_block(a, b, -p);
        contribution.add_block(b, a, -p);
        terms.push(EdgeTerm {
            kind: EdgeTermKind::L,
            edge: (NodeRef::Steiner(a), NodeRef::Steiner(b)),
            contribution,
        });
    }
    Ok(terms)
}
