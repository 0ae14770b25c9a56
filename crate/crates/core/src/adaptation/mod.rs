//! First-order update of Steiner points after a terminal displacement.
//!
//! At a Steiner minimal tree the Steiner gradient vanishes for every terminal
//! configuration near the current one, so differentiating that condition
//! gives the sensitivity
//!
//! ```text
//! X = -(∂²J/∂s²)⁻¹ (∂²J/∂t∂s),    δs ≈ X δt.
//! ```
//!
//! The Hessian is block diagonal over the connected components of the
//! Steiner–Steiner subgraph, and each component is factorised on its own.
//! Large displacements are split into fragments with `X` re-evaluated after
//! each one (see [`adapt_stepwise`]).

mod health;
mod stepwise;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

pub use health::{health_metrics, HealthReport};
pub use stepwise::{adapt_stepwise, AdaptationReport, RunStatus, StepPolicy, StepRecord, StepSizing};

use crate::derivatives::{hessian_ss, mixed_ts, DerivativeError};
use crate::oracle::{optimize_fixed_topology, OracleError, DEFAULT_GRAD_TOL};
use crate::tree_model::{steiner_forest_components, unflatten, Point2, SteinerTree, TreeError};

/// A Hessian whose smallest eigenvalue does not exceed this fraction of the
/// largest is treated as singular.
pub const DEFINITENESS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptError {
    #[error("perturbation has {found} entries, expected {expected}")]
    PerturbationLength { expected: usize, found: usize },
    #[error("perturbation entry {index} is not finite")]
    NonFinitePerturbation { index: usize },
    #[error("ill-conditioned at this configuration: Hessian eigenvalues span [{min_eigenvalue:e}, {max_eigenvalue:e}]")]
    IllConditioned { min_eigenvalue: f64, max_eigenvalue: f64 },
    #[error("invalid step policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Derivative(#[from] DerivativeError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Terminal displacement `δt` in interleaved `(δx0, δy0, δx1, ...)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    delta_t: Vec<f64>,
}

impl Perturbation {
    pub fn new(delta_t: Vec<f64>) -> Result<Self, AdaptError> {
        if !delta_t.len().is_multiple_of(2) {
            return Err(AdaptError::PerturbationLength {
                expected: delta_t.len() + 1,
                found: delta_t.len(),
            });
        }
        if let Some(index) = delta_t.iter().position(|v| !v.is_finite()) {
            return Err(AdaptError::NonFinitePerturbation { index });
        }
        Ok(Self { delta_t })
    }

    pub fn from_points(deltas: &[Point2]) -> Result<Self, AdaptError> {
        Self::new(crate::tree_model::flatten(deltas))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            delta_t: vec![0.0; 2 * n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.delta_t
    }

    pub fn terminal_count(&self) -> usize {
        self.delta_t.len() / 2
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.delta_t)
    }

    pub fn max_abs(&self) -> f64 {
        self.delta_t.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Perturbation {
        Perturbation {
            delta_t: self.delta_t.iter().map(|v| v * factor).collect(),
        }
    }

    fn check_for(&self, tree: &SteinerTree) -> Result<(), AdaptError> {
        if self.delta_t.len() != 2 * tree.n() {
            return Err(AdaptError::PerturbationLength {
                expected: 2 * tree.n(),
                found: self.delta_t.len(),
            });
        }
        Ok(())
    }
}

/// Sorted eigenvalues of a symmetric matrix, ascending.
pub(crate) fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

pub(crate) fn is_definite(min: f64, max: f64) -> bool {
    max > 0.0 && min > DEFINITENESS_TOL * max
}

/// The 2k×2n sensitivity matrix `X` solving `(∂²J/∂s²) X = -(∂²J/∂t∂s)`,
/// factorised independently for every Steiner forest component.
pub fn sensitivity_matrix(tree: &SteinerTree) -> Result<DMatrix<f64>, AdaptError> {
    let (n, k) = (tree.n(), tree.k());
    let hess = hessian_ss(tree)?;
    let mixed = mixed_ts(tree)?;
    let mut x = DMatrix::zeros(2 * k, 2 * n);

    for component in steiner_forest_components(tree.topology()) {
        let size = component.len();
        let mut h = DMatrix::zeros(2 * size, 2 * size);
        let mut rhs = DMatrix::zeros(2 * size, 2 * n);
        for (r, &i) in component.iter().enumerate() {
            for (c, &l) in component.iter().enumerate() {
                if let Some(block) = hess.get(i, l) {
                    h.fixed_view_mut::<2, 2>(2 * r, 2 * c).copy_from(block);
                }
            }
            for j in 0..n {
                if let Some(block) = mixed.get(i, j) {
                    rhs.fixed_view_mut::<2, 2>(2 * r, 2 * j).copy_from(&(-block));
                }
            }
        }

        let eig = symmetric_eigenvalues(h.clone());
        let (min, max) = (eig[0], eig[eig.len() - 1]);
        if !is_definite(min, max) {
            return Err(AdaptError::IllConditioned {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        let chol = h.cholesky().ok_or(AdaptError::IllConditioned {
            min_eigenvalue: min,
            max_eigenvalue: max,
        })?;
        let solved = chol.solve(&rhs);
        for (r, &i) in component.iter().enumerate() {
            x.rows_mut(2 * i, 2).copy_from(&solved.rows(2 * r, 2));
        }
    }
    Ok(x)
}

/// First-order Steiner displacement `δs = X δt`.
pub fn first_order_delta_s(tree: &SteinerTree, p: &Perturbation) -> Result<DVector<f64>, AdaptError> {
    p.check_for(tree)?;
    if tree.k() == 0 {
        return Ok(DVector::zeros(0));
    }
    Ok(sensitivity_matrix(tree)? * p.to_dvector())
}

/// How Steiner points are placed after each displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdaptMode {
    /// First-order update only.
    #[default]
    Pure,
    /// First-order prediction followed by fixed-topology re-optimisation.
    Corrected,
}

/// Result of one adaptation step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptStep {
    pub tree: SteinerTree,
    /// Applied Steiner displacement (after correction in corrected mode).
    pub delta_s: DVector<f64>,
    pub health: HealthReport,
}

/// Moves the terminals by `δt` and the Steiner points by `X δt`, keeping the
/// topology. In corrected mode the prediction seeds a fixed-topology
/// re-optimisation.
pub fn adapt_single(tree: &SteinerTree, p: &Perturbation, mode: AdaptMode) -> Result<AdaptStep, AdaptError> {
    let delta_s = first_order_delta_s(tree, p)?;
    let terminals: Vec<Point2> = tree
        .terminals()
        .iter()
        .zip(unflatten(p.as_slice()))
        .map(|(&t, d)| t + d)
        .collect();
    advance(tree, terminals, &delta_s, mode)
}

pub(crate) fn advance(
    tree: &SteinerTree,
    terminals: Vec<Point2>,
    delta_s: &DVector<f64>,
    mode: AdaptMode,
) -> Result<AdaptStep, AdaptError> {
    let predicted: Vec<Point2> = tree
        .steiner_points()
        .iter()
        .zip(unflatten(delta_s.as_slice()))
        .map(|(&s, d)| s + d)
        .collect();
    let new_tree = match mode {
        AdaptMode::Pure => tree.with_positions(terminals, predicted)?,
        AdaptMode::Corrected => {
            optimize_fixed_topology(&terminals, tree.topology(), &predicted, DEFAULT_GRAD_TOL)?.tree
        }
    };
    let applied = DVector::from_vec(new_tree.steiner_vector()) - DVector::from_vec(tree.steiner_vector());
    let health = health_metrics(&new_tree);
    Ok(AdaptStep {
        tree: new_tree,
        delta_s: if mode == AdaptMode::Pure { delta_s.clone() } else { applied },
        health,
    })
}
