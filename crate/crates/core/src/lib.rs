//! Sensitivity-based adaptation of Euclidean Steiner minimal trees.
//!
//! Given a Steiner minimal tree and a displacement of its terminals, the
//! Steiner points are moved by the linearised optimality condition
//! `δs = -(∂²J/∂s²)⁻¹ (∂²J/∂t∂s) δt`, either in one step or as a sequence of
//! smaller steps. An exact solver for small instances provides ground truth.

pub mod adaptation;
pub mod cli;
pub mod derivatives;
pub mod io;
pub mod oracle;
pub mod par;
pub mod tree_model;
