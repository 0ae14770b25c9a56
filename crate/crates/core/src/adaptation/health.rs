use std::f64::consts::PI;

use super::{is_definite, symmetric_eigenvalues};
use crate::derivatives::hessian_ss;
use crate::tree_model::{check_geometric_conditions, SteinerTree};

/// Indicators that the first-order update is losing validity: short edges,
/// Steiner angles drifting from 2π/3 and a Hessian approaching singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HealthReport {
    pub min_edge_length: f64,
    /// Radians. π when a degenerate edge leaves the angles undefined.
    pub max_steiner_angle_deviation: f64,
    /// Ratio of the extreme Hessian eigenvalues; infinite when the Hessian
    /// is not positive definite.
    pub hessian_condition: f64,
    pub positive_definite: bool,
}

/// Evaluates the health indicators. Degenerate edges yield a report with
/// `positive_definite = false` rather than an error.
pub fn health_metrics(tree: &SteinerTree) -> HealthReport {
    let min_edge_length = tree.min_edge_length();
    let Ok(geometry) = check_geometric_conditions(tree, 0.0) else {
        return HealthReport {
            min_edge_length,
            max_steiner_angle_deviation: PI,
            hessian_condition: f64::INFINITY,
            positive_definite: false,
        };
    };
    let (hessian_condition, positive_definite) = if tree.k() == 0 {
        (1.0, true)
    } else {
        match hessian_ss(tree) {
            Ok(h) => {
                let eig = symmetric_eigenvalues(h.to_dense());
                let (min, max) = (eig[0], eig[eig.len() - 1]);
                if is_definite(min, max) {
                    (max / min, true)
                } else {
                    (f64::INFINITY, false)
                }
            }
            Err(_) => (f64::INFINITY, false),
        }
    };
    HealthReport {
        min_edge_length,
        max_steiner_angle_deviation: geometry.max_steiner_angle_deviation,
        hessian_condition,
        positive_definite,
    }
}
