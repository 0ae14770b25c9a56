//! Fixed-topology minimisation of the tree length over Steiner positions.
//!
//! The length is convex in the Steiner coordinates for a fixed topology, so a
//! damped Newton method on the smoothed length `Σ sqrt(|d|² + ε²)` reaches
//! the global minimum. `ε` starts at a hundredth of the instance diameter and
//! is reduced to [`SMOOTHING`], each stage warm-started from the previous one,
//! so that Newton never has to approach a near-kink from far away.
//!
//! Optimal Steiner points frequently sit on a terminal or on another Steiner
//! point, where the length is not differentiable. In the final stage, nodes
//! that come within [`MERGE_THRESHOLD`] of a neighbour are merged and
//! optimised as one point. At convergence every subset of every merged
//! cluster is tested with the one-sided directional derivative; a subset
//! whose departure lowers the length is split off and the continuation
//! resumes.

use nalgebra::{DMatrix, DVector, Vector2};

use super::OracleError;
use crate::tree_model::{NodeRef, Point2, SteinerTopology, SteinerTree};

pub const DEFAULT_GRAD_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;
/// Edge-length smoothing used by the minimiser.
pub const SMOOTHING: f64 = 1e-12;
/// Adjacent nodes closer than this are treated as one point.
pub const MERGE_THRESHOLD: f64 = 1e-9;

const RELEASE_TOL: f64 = 1e-9;
/// Distance, relative to the instance diameter, at which a released subset
/// restarts.
const RELEASE_OFFSET: f64 = 1e-6;
/// Ratio between consecutive smoothing parameters.
const SMOOTHING_DECAY: f64 = 1e-2;
/// Gradient tolerance of the intermediate smoothing stages.
const STAGE_GRAD_TOL: f64 = 1e-8;
/// Merge radius, relative to the instance scale, tried once when the final
/// stage stalls next to a kink; wrong merges are undone by the release test.
const SNAP_THRESHOLD: f64 = 1e-6;
/// Newton iterations after which an intermediate stage is abandoned.
const STAGE_MAX_ITERATIONS: usize = 200;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeStatus {
    Converged,
    /// Iteration budget exhausted; the tree is the best iterate.
    IterationLimit,
    /// No further decrease was achievable in double precision before the
    /// gradient tolerance was met; the tree is the best iterate.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub tree: SteinerTree,
    /// Norm of the gradient with respect to the free (unmerged) positions.
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Edges whose endpoints were merged at the optimum.
    pub collapsed_edges: Vec<(NodeRef, NodeRef)>,
    pub status: OptimizeStatus,
}

impl OptimizeResult {
    pub fn converged(&self) -> bool {
        self.status == OptimizeStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Anchor {
    /// Position is the free variable with this index.
    Free(usize),
    /// Sits on this terminal.
    Pinned(usize),
}

#[derive(Debug, Clone, Copy)]
enum End {
    Var(usize),
    Fixed(Vector2<f64>, usize),
}

struct Minimizer<'a> {
    terminals: Vec<Vector2<f64>>,
    /// Edges with at least one Steiner endpoint.
    edges: Vec<(NodeRef, NodeRef)>,
    topology: &'a SteinerTopology,
    anchor: Vec<Anchor>,
    vars: Vec<Vector2<f64>>,
    eps: f64,
}

impl<'a> Minimizer<'a> {
    fn new(terminals: &[Point2], topology: &'a SteinerTopology, initial: &[Point2]) -> Self {
        Minimizer {
            terminals: terminals.iter().map(|p| p.to_vector()).collect(),
            edges: topology
                .edges()
                .filter(|(a, b)| a.is_steiner() || b.is_steiner())
                .collect(),
            topology,
            anchor: (0..initial.len()).map(Anchor::Free).collect(),
            vars: initial.iter().map(|p| p.to_vector()).collect(),
            eps: SMOOTHING,
        }
    }

    fn smooth_len(&self, d: Vector2<f64>) -> f64 {
        (d.norm_squared() + self.eps * self.eps).sqrt()
    }

    fn end(&self, node: NodeRef) -> End {
        match node {
            NodeRef::Terminal(t) => End::Fixed(self.terminals[t], t),
            NodeRef::Steiner(i) => match self.anchor[i] {
                Anchor::Free(v) => End::Var(v),
                Anchor::Pinned(t) => End::Fixed(self.terminals[t], t),
            },
        }
    }

    fn point(&self, end: End, vars: &[Vector2<f64>]) -> Vector2<f64> {
        match end {
            End::Var(v) => vars[v],
            End::Fixed(p, _) => p,
        }
    }

    fn position(&self, node: NodeRef) -> Vector2<f64> {
        self.point(self.end(node), &self.vars)
    }

    /// Edges that depend on at least one free variable.
    fn active_edges(&self) -> impl Iterator<Item = (End, End)> + '_ {
        self.edges.iter().filter_map(|&(a, b)| {
            let (ea, eb) = (self.end(a), self.end(b));
            match (ea, eb) {
                (End::Fixed(..), End::Fixed(..)) => None,
                (End::Var(x), End::Var(y)) if x == y => None,
                _ => Some((ea, eb)),
            }
        })
    }

    fn objective(&self, vars: &[Vector2<f64>]) -> f64 {
        self.active_edges()
            .map(|(a, b)| self.smooth_len(self.point(a, vars) - self.point(b, vars)))
            .sum()
    }

    fn gradient(&self, vars: &[Vector2<f64>]) -> DVector<f64> {
        let mut g = DVector::zeros(2 * vars.len());
        for (a, b) in self.active_edges() {
            let d = self.point(a, vars) - self.point(b, vars);
            let u = d / self.smooth_len(d);
            if let End::Var(v) = a {
                g[2 * v] += u.x;
                g[2 * v + 1] += u.y;
            }
            if let End::Var(v) = b {
                g[2 * v] -= u.x;
                g[2 * v + 1] -= u.y;
            }
        }
        g
    }

    fn hessian(&self, vars: &[Vector2<f64>]) -> DMatrix<f64> {
        let dim = 2 * vars.len();
        let mut h = DMatrix::zeros(dim, dim);
        for (a, b) in self.active_edges() {
            let d = self.point(a, vars) - self.point(b, vars);
            let r = self.smooth_len(d);
            let block = (nalgebra::Matrix2::identity() - d * d.transpose() / (r * r)) / r;
            let ia = match a {
                End::Var(v) => Some(v),
                End::Fixed(..) => None,
            };
            let ib = match b {
                End::Var(v) => Some(v),
                End::Fixed(..) => None,
            };
            for (x, sx) in [(ia, 1.0), (ib, -1.0)] {
                for (y, sy) in [(ia, 1.0), (ib, -1.0)] {
                    if let (Some(x), Some(y)) = (x, y) {
                        let mut view = h.fixed_view_mut::<2, 2>(2 * x, 2 * y);
                        view += block * (sx * sy);
                    }
                }
            }
        }
        h
    }

    fn remove_var(&mut self, v: usize) {
        let last = self.vars.len() - 1;
        self.vars.swap_remove(v);
        for a in &mut self.anchor {
            if *a == Anchor::Free(last) {
                *a = Anchor::Free(v);
            }
        }
    }

    /// Merges every pair of adjacent nodes closer than `threshold`.
    fn merge_close(&mut self, threshold: f64) {
        loop {
            let close = self.active_edges().find_map(|(a, b)| {
                let d = self.point(a, &self.vars) - self.point(b, &self.vars);
                (d.norm() < threshold).then_some((a, b))
            });
            let Some(pair) = close else { return };
            match pair {
                (End::Var(v), End::Fixed(_, t)) | (End::Fixed(_, t), End::Var(v)) => {
                    for a in &mut self.anchor {
                        if *a == Anchor::Free(v) {
                            *a = Anchor::Pinned(t);
                        }
                    }
                    self.remove_var(v);
                }
                (End::Var(v), End::Var(w)) => {
                    let (keep, drop) = (v.min(w), v.max(w));
                    for a in &mut self.anchor {
                        if *a == Anchor::Free(drop) {
                            *a = Anchor::Free(keep);
                        }
                    }
                    self.remove_var(drop);
                }
                (End::Fixed(..), End::Fixed(..)) => unreachable!("active edges touch a variable"),
            }
        }
    }

    fn shares_point(&self, i: usize, other: NodeRef) -> bool {
        match (self.anchor[i], other) {
            (Anchor::Pinned(t), NodeRef::Terminal(u)) => t == u,
            (a, NodeRef::Steiner(j)) => self.anchor[j] == a,
            (Anchor::Free(_), NodeRef::Terminal(_)) => false,
        }
    }

    /// Splits off the subset of a merged cluster whose departure lowers the
    /// length the most. Moving a subset `A` by a unit vector `v` changes the
    /// length by `pull·v + cut`, where `pull` sums the unit vectors of the
    /// edges leaving the cluster from `A` and `cut` counts the edges between
    /// `A` and the rest of the cluster. Returns false when no subset has
    /// `|pull| > cut`.
    fn release_one(&mut self, offset: f64) -> bool {
        let mut clusters: Vec<(Anchor, Vec<usize>)> = Vec::new();
        for (i, &a) in self.anchor.iter().enumerate() {
            match clusters.iter_mut().find(|(b, _)| *b == a) {
                Some((_, members)) => members.push(i),
                None => clusters.push((a, vec![i])),
            }
        }
        let mut best: Option<(f64, Vec<usize>, Vector2<f64>)> = None;
        for (anchor, members) in &clusters {
            let pinned = matches!(anchor, Anchor::Pinned(_));
            if !pinned && members.len() < 2 {
                continue;
            }
            let here = self.position(NodeRef::Steiner(members[0]));
            let full = (1u32 << members.len()) - 1;
            // A free cluster moving as a whole is already covered by the gradient.
            let last = if pinned { full } else { full - 1 };
            for mask in 1..=last {
                let subset: Vec<usize> = (0..members.len())
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| members[b])
                    .collect();
                let mut cut = 0.0;
                let mut pull = Vector2::zeros();
                for &i in &subset {
                    for other in self.topology.neighbors(NodeRef::Steiner(i)) {
                        if matches!(other, NodeRef::Steiner(j) if subset.contains(&j)) {
                            continue;
                        }
                        if self.shares_point(i, other) {
                            cut += 1.0;
                        } else {
                            let d = here - self.position(other);
                            let len = d.norm();
                            if len > 0.0 {
                                pull += d / len;
                            }
                        }
                    }
                }
                let excess = pull.norm() - cut;
                if excess > RELEASE_TOL && best.as_ref().is_none_or(|(e, _, _)| excess > *e) {
                    best = Some((excess, subset, pull));
                }
            }
        }
        let Some((_, subset, pull)) = best else {
            return false;
        };
        let here = self.position(NodeRef::Steiner(subset[0]));
        self.vars.push(here - pull.normalize() * offset);
        let new = Anchor::Free(self.vars.len() - 1);
        for &i in &subset {
            self.anchor[i] = new;
        }
        true
    }

    fn newton_direction(&self, g: &DVector<f64>) -> DVector<f64> {
        let h = self.hessian(&self.vars);
        let dim = g.len();
        let scale = (h.trace() / dim as f64).abs().max(1.0);
        let mut shift = 0.0;
        loop {
            let shifted = &h + DMatrix::identity(dim, dim) * shift;
            if let Some(chol) = shifted.cholesky() {
                let d = chol.solve(&(-g));
                if d.iter().all(|x| x.is_finite()) {
                    return d;
                }
            }
            shift = if shift == 0.0 { 1e-12 * scale } else { shift * 100.0 };
            if shift > 1e12 * scale {
                return -g;
            }
        }
    }

    fn step(&self, d: &DVector<f64>, alpha: f64) -> Vec<Vector2<f64>> {
        self.vars
            .iter()
            .enumerate()
            .map(|(v, p)| p + Vector2::new(d[2 * v], d[2 * v + 1]) * alpha)
            .collect()
    }

    /// Backtracking line search. A full step is also accepted when it at
    /// least halves the gradient while raising the length by no more than
    /// rounding, which keeps Newton's quadratic convergence once length
    /// differences fall below double precision.
    fn line_search(&mut self, d: &DVector<f64>, g: &DVector<f64>) -> bool {
        let f0 = self.objective(&self.vars);
        let slope = g.dot(d);
        if slope >= 0.0 {
            return false;
        }
        let full = self.step(d, 1.0);
        let f_full = self.objective(&full);
        if f_full <= f0 + 2.0 * f64::EPSILON * f0.abs() && self.gradient(&full).norm() <= 0.5 * g.norm() {
            self.vars = full;
            return true;
        }
        let mut alpha = 1.0;
        for _ in 0..MAX_HALVINGS {
            let trial = self.step(d, alpha);
            let f = self.objective(&trial);
            // The strict check rejects steps lost to rounding.
            if f < f0 && f <= f0 + ARMIJO * alpha * slope {
                self.vars = trial;
                return true;
            }
            alpha *= 0.5;
        }
        false
    }
}

/// Minimises the tree length over Steiner positions for a fixed topology,
/// starting from `initial_s`.
pub fn optimize_fixed_topology(
    terminals: &[Point2],
    topology: &SteinerTopology,
    initial_s: &[Point2],
    grad_tol: f64,
) -> Result<OptimizeResult, OracleError> {
    if !(grad_tol > 0.0 && grad_tol.is_finite()) {
        return Err(OracleError::InvalidTolerance(grad_tol));
    }
    // Validates the topology, counts and coordinates up front.
    SteinerTree::new(topology.clone(), terminals.to_vec(), initial_s.to_vec())?;

    let mut m = Minimizer::new(terminals, topology, initial_s);
    let scale = diameter(terminals).max(f64::MIN_POSITIVE);
    let unit = scale.max(1.0);
    let mut stages = Vec::new();
    let mut eps = SMOOTHING_DECAY * scale;
    while eps > SMOOTHING * unit {
        stages.push(eps);
        eps *= SMOOTHING_DECAY;
    }
    stages.push(SMOOTHING * unit);
    let final_stage = stages.len() - 1;
    let offset = RELEASE_OFFSET * scale;
    // After a release, resume where the smoothing is well below the offset.
    let resume = stages.iter().position(|&e| e <= SMOOTHING_DECAY * offset).unwrap_or(final_stage);

    let max_releases = 4 * topology.k + 4;
    let mut releases = 0;
    let mut iterations = 0;
    let mut stage = 0;
    let mut stage_iterations = 0;
    let mut snapped = false;
    let status;
    let mut gnorm;
    loop {
        m.eps = stages[stage];
        if stage == final_stage {
            m.merge_close(MERGE_THRESHOLD * unit);
        }
        let g = m.gradient(&m.vars);
        gnorm = g.norm();
        let tol = if stage == final_stage { grad_tol } else { grad_tol.max(STAGE_GRAD_TOL) };
        let stage_done = gnorm < tol || (stage < final_stage && stage_iterations >= STAGE_MAX_ITERATIONS);
        if stage_done {
            if stage < final_stage {
                stage += 1;
                stage_iterations = 0;
                continue;
            }
            if releases < max_releases && m.release_one(offset) {
                releases += 1;
                stage = resume;
                stage_iterations = 0;
                snapped = false;
                continue;
            }
            status = OptimizeStatus::Converged;
            break;
        }
        if iterations >= MAX_ITERATIONS {
            status = OptimizeStatus::IterationLimit;
            break;
        }
        iterations += 1;
        stage_iterations += 1;
        let d = m.newton_direction(&g);
        if !m.line_search(&d, &g) && !m.line_search(&(-&g), &g) {
            if stage < final_stage {
                stage += 1;
                stage_iterations = 0;
                continue;
            }
            if !snapped {
                snapped = true;
                let before = m.vars.len();
                m.merge_close(SNAP_THRESHOLD * unit);
                if m.vars.len() < before {
                    continue;
                }
            }
            if releases < max_releases && m.release_one(offset) {
                releases += 1;
                stage = resume;
                stage_iterations = 0;
                snapped = false;
                continue;
            }
            status = OptimizeStatus::Stalled;
            break;
        }
    }

    let steiner: Vec<Point2> = (0..topology.k)
        .map(|i| Point2::from(m.position(NodeRef::Steiner(i))))
        .collect();
    let collapsed_edges = topology
        .edges()
        .filter(|&(a, b)| match (a, b) {
            (NodeRef::Steiner(i), other) | (other, NodeRef::Steiner(i)) => m.shares_point(i, other),
            _ => false,
        })
        .collect();
    Ok(OptimizeResult {
        tree: SteinerTree::new(topology.clone(), terminals.to_vec(), steiner)?,
        gradient_norm: gnorm,
        iterations,
        collapsed_edges,
        status,
    })
}

fn diameter(points: &[Point2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max(p.distance(q));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivatives::gradient_s;
    use crate::tree_model::tree_length;

    fn example_one_terminals() -> Vec<Point2> {
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]
    }

    #[test]
    fn example_one_fermat_point() {
        let result = optimize_fixed_topology(
            &example_one_terminals(),
            &SteinerTopology::star(3),
            &[Point2::new(1.0 / 3.0, 1.0 / 3.0)],
            DEFAULT_GRAD_TOL,
        )
        .unwrap();
        assert!(result.converged());
        let s = result.tree.steiner_points()[0];
        let exact = 1.0 / (3.0 + 3f64.sqrt());
        assert!((s.x - exact).abs() < 1e-10 && (s.y - exact).abs() < 1e-10, "{s}");
        assert!((s.x - 0.211).abs() < 1e-3);
        assert!(gradient_s(&result.tree).unwrap().norm() < DEFAULT_GRAD_TOL);
        assert!(result.collapsed_edges.is_empty());
    }

    #[test]
    fn example_two_shifted_terminals() {
        let terminals = vec![Point2::new(0.4, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let result = optimize_fixed_topology(
            &terminals,
            &SteinerTopology::star(3),
            &[Point2::new(0.2, 0.2)],
            DEFAULT_GRAD_TOL,
        )
        .unwrap();
        let s = result.tree.steiner_points()[0];
        assert!((s.x - 0.437).abs() < 1e-3 && (s.y - 0.052).abs() < 1e-3, "{s}");
    }

    #[test]
    fn obtuse_triangle_collapses_onto_terminal() {
        let terminals = vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(1.0, 0.05)];
        let result = optimize_fixed_topology(
            &terminals,
            &SteinerTopology::star(3),
            &[Point2::new(1.0, 0.5)],
            DEFAULT_GRAD_TOL,
        )
        .unwrap();
        assert!(result.converged(), "{:?}", result.status);
        assert_eq!(result.tree.steiner_points()[0], Point2::new(1.0, 0.05));
        assert_eq!(
            result.collapsed_edges,
            vec![(NodeRef::Terminal(2), NodeRef::Steiner(0))]
        );

        // Dense grid search around the middle terminal finds nothing shorter.
        let length = tree_length(&result.tree);
        let mut best_grid = f64::INFINITY;
        for i in -200..=200 {
            for j in -200..=200 {
                let p = Point2::new(1.0 + i as f64 * 1e-3, 0.05 + j as f64 * 1e-3);
                let len: f64 = terminals.iter().map(|t| t.distance(&p)).sum();
                best_grid = best_grid.min(len);
            }
        }
        assert!(length <= best_grid + 1e-12);
    }

    #[test]
    fn starting_on_a_terminal_is_released() {
        let result = optimize_fixed_topology(
            &example_one_terminals(),
            &SteinerTopology::star(3),
            &[Point2::new(1.0, 0.0)],
            DEFAULT_GRAD_TOL,
        )
        .unwrap();
        assert!(result.converged());
        assert!(result.collapsed_edges.is_empty());
        assert!((result.tree.steiner_points()[0].x - 0.2113248654).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let err = optimize_fixed_topology(
            &example_one_terminals(),
            &SteinerTopology::star(3),
            &[Point2::default()],
            0.0,
        );
        assert!(matches!(err, Err(OracleError::InvalidTolerance(_))));
    }
}
