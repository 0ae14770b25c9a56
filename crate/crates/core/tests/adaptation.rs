mod common;

use common::*;
use nalgebra::DVector;
use rand::Rng;
use steiner_core::adaptation::{
    adapt_single, adapt_stepwise, first_order_delta_s, health_metrics, sensitivity_matrix, AdaptMode, Perturbation,
    RunStatus, StepPolicy,
};
use steiner_core::oracle::optimize_fixed_topology;
use steiner_core::oracle::DEFAULT_GRAD_TOL;
use steiner_core::tree_model::{steiner_forest_components, unflatten, NodeRef, Point2, SteinerTree};

/// Exact Steiner minimal trees with at least one Steiner point.
fn smt_corpus(seed: u64, count: usize) -> Vec<SteinerTree> {
    let mut rng = rng(seed);
    let mut trees = Vec::new();
    while trees.len() < count {
        let n = rng.gen_range(3..=6);
        let tree = random_smt(&mut rng, n);
        if tree.k() > 0 {
            trees.push(tree);
        }
    }
    trees
}

#[test]
fn translation_moves_steiner_points_rigidly() {
    for tree in smt_corpus(21, 40) {
        let x = sensitivity_matrix(&tree).unwrap();
        for v in [Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(-0.3, 0.7)] {
            let dt = DVector::from_iterator(2 * tree.n(), (0..tree.n()).flat_map(|_| [v.x, v.y]));
            let ds = &x * dt;
            for i in 0..tree.k() {
                assert!((ds[2 * i] - v.x).abs() < 1e-9 && (ds[2 * i + 1] - v.y).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn scaling_terminals_scales_steiner_points() {
    for tree in smt_corpus(22, 40) {
        let x = sensitivity_matrix(&tree).unwrap();
        let xt = &x * DVector::from_vec(tree.terminal_vector());
        let s = DVector::from_vec(tree.steiner_vector());
        assert!((xt - s).amax() < 1e-8);
    }
}

#[test]
fn infinitesimal_rotation_is_second_order_accurate() {
    let eps = 1e-3;
    for tree in smt_corpus(23, 40) {
        let dt: Vec<Point2> = tree.terminals().iter().map(|&t| t.rotated(eps) - t).collect();
        let ds = first_order_delta_s(&tree, &Perturbation::from_points(&dt).unwrap()).unwrap();
        for (i, &s) in tree.steiner_points().iter().enumerate() {
            let exact = s.rotated(eps) - s;
            let err = (Point2::new(ds[2 * i], ds[2 * i + 1]) - exact).norm();
            assert!(err <= 10.0 * eps * eps, "{err}");
        }
    }
}

#[test]
fn components_only_see_their_own_terminals() {
    let mut seen_split = false;
    for tree in smt_corpus(24, 200) {
        let components = steiner_forest_components(tree.topology());
        if components.len() < 2 {
            continue;
        }
        seen_split = true;
        let x = sensitivity_matrix(&tree).unwrap();
        for component in &components {
            for j in 0..tree.n() {
                let adjacent = component
                    .iter()
                    .any(|&i| tree.topology().neighbors(NodeRef::Steiner(i)).contains(&NodeRef::Terminal(j)));
                if adjacent {
                    continue;
                }
                for &i in component {
                    for r in 2 * i..2 * i + 2 {
                        assert_eq!(x[(r, 2 * j)], 0.0);
                        assert_eq!(x[(r, 2 * j + 1)], 0.0);
                    }
                }
            }
        }
    }
    assert!(seen_split, "corpus contains no multi-component tree");
}

#[test]
fn stepping_reduces_the_error() {
    // Only meaningful while the perturbed optimum keeps the topology without
    // collapsing an edge.
    let mut rng = rng(25);
    let mut checked = 0;
    for tree in smt_corpus(25, 40) {
        if tree.min_edge_length() < 0.05 {
            continue;
        }
        let dt: Vec<f64> = (0..2 * tree.n()).map(|_| rng.gen_range(-0.02..0.02)).collect();
        let p = Perturbation::new(dt.clone()).unwrap();
        let moved: Vec<Point2> = tree
            .terminals()
            .iter()
            .zip(unflatten(&dt))
            .map(|(&t, d)| t + d)
            .collect();
        let truth = optimize_fixed_topology(&moved, tree.topology(), tree.steiner_points(), DEFAULT_GRAD_TOL).unwrap();
        if !truth.collapsed_edges.is_empty() {
            continue;
        }
        let truth = truth.tree;
        let error = |t: &SteinerTree| {
            t.steiner_points()
                .iter()
                .zip(truth.steiner_points())
                .map(|(a, b)| a.distance(b))
                .fold(0.0, f64::max)
        };
        let one = adapt_stepwise(&tree, &p, &StepPolicy::steps(1)).unwrap();
        let ten = adapt_stepwise(&tree, &p, &StepPolicy::steps(10)).unwrap();
        if one.status != RunStatus::Completed || ten.status != RunStatus::Completed {
            continue;
        }
        let (e1, e10) = (error(one.final_tree()), error(ten.final_tree()));
        assert!(e10 <= e1 + 1e-12, "{e10} > {e1}");
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} usable instances");
}

#[test]
fn corrected_mode_lands_on_the_fixed_topology_optimum() {
    let mut rng = rng(26);
    for tree in smt_corpus(26, 20) {
        let dt: Vec<f64> = (0..2 * tree.n()).map(|_| rng.gen_range(-0.01..0.01)).collect();
        let step = adapt_single(&tree, &Perturbation::new(dt).unwrap(), AdaptMode::Corrected).unwrap();
        let g = steiner_core::derivatives::gradient_s(&step.tree);
        if let Ok(g) = g {
            assert!(g.norm() < 1e-8, "{}", g.norm());
        }
        assert!(step.health.min_edge_length > 0.0);
    }
}

#[test]
fn health_of_optimal_trees() {
    for tree in smt_corpus(27, 40) {
        let h = health_metrics(&tree);
        assert!(h.positive_definite);
        assert!(h.hessian_condition >= 1.0);
        assert!(h.max_steiner_angle_deviation < 1e-6);
    }
}
