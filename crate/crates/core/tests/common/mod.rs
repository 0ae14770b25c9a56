#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use steiner_core::derivatives::{cost, gradient_s};
use steiner_core::oracle::{enumerate_full_topologies, solve_exact};
use steiner_core::tree_model::{Point2, SteinerTopology, SteinerTree};

pub const FD_STEP: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn example_one_terminals() -> Vec<Point2> {
    vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]
}

/// Example 1 with the exact Fermat point `a = 1/(3+√3)`.
pub fn example_one() -> SteinerTree {
    let a = 1.0 / (3.0 + 3f64.sqrt());
    SteinerTree::new(SteinerTopology::star(3), example_one_terminals(), vec![Point2::new(a, a)]).unwrap()
}

pub fn uniform_point(rng: &mut impl Rng) -> Point2 {
    Point2::new(rng.gen::<f64>(), rng.gen::<f64>())
}

pub fn random_terminals(rng: &mut impl Rng, n: usize) -> Vec<Point2> {
    (0..n).map(|_| uniform_point(rng)).collect()
}

/// A full topology on 3 to 6 terminals with every node uniform in the unit
/// square, redrawn until no edge is shorter than `min_edge`. Not optimal.
pub fn random_valid_tree(rng: &mut impl Rng, min_edge: f64) -> SteinerTree {
    let n = rng.gen_range(3..=6);
    let topologies = enumerate_full_topologies(n).unwrap();
    loop {
        let topology = topologies.choose(rng).unwrap().topology().clone();
        let terminals = random_terminals(rng, n);
        let steiner = (0..topology.k).map(|_| uniform_point(rng)).collect();
        let tree = SteinerTree::new(topology, terminals, steiner).unwrap();
        if tree.min_edge_length() >= min_edge {
            return tree;
        }
    }
}

/// The exact Steiner minimal tree of uniform random terminals.
pub fn random_smt(rng: &mut impl Rng, n: usize) -> SteinerTree {
    solve_exact(&random_terminals(rng, n)).unwrap().tree
}

fn steiner_shifted(tree: &SteinerTree, coord: usize, h: f64) -> SteinerTree {
    let mut s = tree.steiner_vector();
    s[coord] += h;
    tree.with_positions(tree.terminals().to_vec(), steiner_core::tree_model::unflatten(&s))
        .unwrap()
}

fn terminal_shifted(tree: &SteinerTree, coord: usize, h: f64) -> SteinerTree {
    let mut t = tree.terminal_vector();
    t[coord] += h;
    tree.with_positions(steiner_core::tree_model::unflatten(&t), tree.steiner_points().to_vec())
        .unwrap()
}

/// Central differences of the cost with respect to the Steiner coordinates.
pub fn fd_gradient(tree: &SteinerTree, h: f64) -> DVector<f64> {
    DVector::from_fn(2 * tree.k(), |c, _| {
        let plus = cost(&steiner_shifted(tree, c, h)).unwrap();
        let minus = cost(&steiner_shifted(tree, c, -h)).unwrap();
        (plus - minus) / (2.0 * h)
    })
}

/// Central differences of the analytic gradient along Steiner coordinates.
pub fn fd_hessian(tree: &SteinerTree, h: f64) -> DMatrix<f64> {
    let k2 = 2 * tree.k();
    let mut m = DMatrix::zeros(k2, k2);
    for c in 0..k2 {
        let diff = (gradient_s(&steiner_shifted(tree, c, h)).unwrap()
            - gradient_s(&steiner_shifted(tree, c, -h)).unwrap())
            / (2.0 * h);
        m.set_column(c, &diff);
    }
    m
}

/// Central differences of the analytic gradient along terminal coordinates.
pub fn fd_mixed(tree: &SteinerTree, h: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * tree.k(), 2 * tree.n());
    for c in 0..2 * tree.n() {
        let diff = (gradient_s(&terminal_shifted(tree, c, h)).unwrap()
            - gradient_s(&terminal_shifted(tree, c, -h)).unwrap())
            / (2.0 * h);
        m.set_column(c, &diff);
    }
    m
}

/// Frobenius-norm relative error of `a` against the reference `b`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
