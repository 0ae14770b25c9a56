use super::{advance, first_order_delta_s, health_metrics, AdaptError, AdaptMode, HealthReport, Perturbation};
use crate::derivatives::DerivativeError;
use crate::tree_model::{tree_length, unflatten, Point2, SteinerTree};

const MAX_STEPS: usize = 1_000_000;

/// How a displacement is cut into fragments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSizing {
    /// This many equal fragments.
    Steps(usize),
    /// Fragments whose largest coordinate change is at most this value.
    MaxStepNorm(f64),
    /// Fragments whose largest coordinate change is at most this fraction of
    /// the current shortest edge.
    EdgeFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub sizing: StepSizing,
    pub mode: AdaptMode,
    /// Runs stop once the Hessian condition number exceeds this.
    pub condition_limit: f64,
    /// Runs stop once the shortest edge falls below this fraction of the
    /// initial shortest edge.
    pub min_edge_fraction: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            sizing: StepSizing::EdgeFraction(0.1),
            mode: AdaptMode::Pure,
            condition_limit: 1e6,
            min_edge_fraction: 0.01,
        }
    }
}

impl StepPolicy {
    pub fn steps(count: usize) -> Self {
        StepPolicy {
            sizing: StepSizing::Steps(count),
            ..Default::default()
        }
    }

    pub fn max_step_norm(h: f64) -> Self {
        StepPolicy {
            sizing: StepSizing::MaxStepNorm(h),
            ..Default::default()
        }
    }

    pub fn with_mode(self, mode: AdaptMode) -> Self {
        StepPolicy { mode, ..self }
    }

    fn validate(&self, total: f64) -> Result<(), AdaptError> {
        let bad = |msg: String| Err(AdaptError::InvalidPolicy(msg));
        match self.sizing {
            StepSizing::Steps(0) => return bad("step count must be positive".into()),
            StepSizing::Steps(k) if k > MAX_STEPS => return bad(format!("step count {k} exceeds {MAX_STEPS}")),
            StepSizing::MaxStepNorm(h) if !(h > 0.0 && h.is_finite()) => {
                return bad(format!("maximum step norm must be positive, got {h}"))
            }
            StepSizing::MaxStepNorm(h) if total / h > MAX_STEPS as f64 => {
                return bad(format!("maximum step norm {h} needs more than {MAX_STEPS} steps"))
            }
            StepSizing::EdgeFraction(f) if !(f > 0.0 && f <= 1.0) => {
                return bad(format!("edge fraction must lie in (0, 1], got {f}"))
            }
            _ => {}
        }
        if self.condition_limit.is_nan() || self.condition_limit < 1.0 {
            return bad(format!("condition limit must be at least 1, got {}", self.condition_limit));
        }
        if !(self.min_edge_fraction > 0.0 && self.min_edge_fraction < 1.0) {
            return bad(format!(
                "minimum edge fraction must lie in (0, 1), got {}",
                self.min_edge_fraction
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    AbortedIllConditioned,
    AbortedDegenerateEdge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 0 for the starting tree.
    pub step: usize,
    /// Terminal displacement applied in this step.
    pub delta_t: Vec<f64>,
    pub delta_s: Vec<f64>,
    pub tree: SteinerTree,
    pub health: HealthReport,
    pub length: f64,
}

/// Trajectory of a stepwise run. `records[0]` is the starting tree.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationReport {
    pub records: Vec<StepRecord>,
    pub status: RunStatus,
}

impl AdaptationReport {
    pub fn final_tree(&self) -> &SteinerTree {
        &self.records.last().expect("report always holds the start").tree
    }

    /// Number of displacement steps taken.
    pub fn steps_taken(&self) -> usize {
        self.records.len() - 1
    }

    /// Sum of the applied terminal fragments.
    pub fn applied_delta_t(&self) -> Vec<f64> {
        let len = self.records[0].delta_t.len();
        self.records.iter().fold(vec![0.0; len], |mut acc, r| {
            for (a, d) in acc.iter_mut().zip(&r.delta_t) {
                *a += d;
            }
            acc
        })
    }
}

/// Splits `δt` into fragments per `policy`, re-evaluating the sensitivity at
/// every intermediate tree. The run stops early, keeping every record up to
/// that point, when the Hessian loses definiteness or exceeds the condition
/// limit, or when an edge shrinks below the configured fraction of the
/// initial shortest edge.
pub fn adapt_stepwise(
    tree: &SteinerTree,
    p: &Perturbation,
    policy: &StepPolicy,
) -> Result<AdaptationReport, AdaptError> {
    p.check_for(tree)?;
    let total = p.max_abs();
    policy.validate(total)?;

    let start_terminals = tree.terminals().to_vec();
    let deltas = unflatten(p.as_slice());
    let terminals_at = |c: f64| -> Vec<Point2> {
        if c == 1.0 {
            start_terminals.iter().zip(&deltas).map(|(&t, &d)| t + d).collect()
        } else {
            start_terminals.iter().zip(&deltas).map(|(&t, &d)| t + d * c).collect()
        }
    };

    let initial_min_edge = tree.min_edge_length();
    let mut records = vec![StepRecord {
        step: 0,
        delta_t: vec![0.0; p.as_slice().len()],
        delta_s: vec![0.0; 2 * tree.k()],
        tree: tree.clone(),
        health: health_metrics(tree),
        length: tree_length(tree),
    }];

    let fixed_count = match policy.sizing {
        StepSizing::Steps(k) => Some(k),
        StepSizing::MaxStepNorm(h) => Some(((total / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize),
        StepSizing::EdgeFraction(_) => None,
    };

    let mut current = tree.clone();
    let mut progress = 0.0;
    let mut step = 0;
    let status = loop {
        if progress >= 1.0 {
            break RunStatus::Completed;
        }
        step += 1;
        let next = match (fixed_count, policy.sizing) {
            (Some(count), _) => {
                if step >= count {
                    1.0
                } else {
                    step as f64 / count as f64
                }
            }
            (None, StepSizing::EdgeFraction(f)) => {
                if total == 0.0 {
                    1.0
                } else {
                    (progress + f * current.min_edge_length() / total).min(1.0)
                }
            }
            (None, _) => unreachable!("only edge-fraction sizing has no fixed count"),
        };
        if next <= progress {
            break RunStatus::AbortedDegenerateEdge;
        }

        let previous = terminals_at(progress);
        let terminals = terminals_at(next);
        let fragment: Vec<f64> = terminals
            .iter()
            .zip(&previous)
            .flat_map(|(a, b)| [a.x - b.x, a.y - b.y])
            .collect();
        let fragment_p = Perturbation::new(fragment.clone())?;

        let delta_s = match first_order_delta_s(&current, &fragment_p) {
            Ok(ds) => ds,
            Err(AdaptError::IllConditioned { .. }) => break RunStatus::AbortedIllConditioned,
            Err(AdaptError::Derivative(DerivativeError::DegenerateEdge { .. })) => {
                break RunStatus::AbortedDegenerateEdge
            }
            Err(e) => return Err(e),
        };
        let advanced = advance(&current, terminals, &delta_s, policy.mode)?;
        let health = advanced.health;
        records.push(StepRecord {
            step,
            delta_t: fragment,
            delta_s: advanced.delta_s.as_slice().to_vec(),
            length: tree_length(&advanced.tree),
            tree: advanced.tree.clone(),
            health,
        });
        current = advanced.tree;
        progress = next;

        if health.min_edge_length < policy.min_edge_fraction * initial_min_edge {
            break RunStatus::AbortedDegenerateEdge;
        }
        if !health.positive_definite || health.hessian_condition > policy.condition_limit {
            break RunStatus::AbortedIllConditioned;
        }
    };

    Ok(AdaptationReport { records, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::adapt_single;
    use crate::tree_model::SteinerTopology;

    fn example_one() -> SteinerTree {
        let a = 1.0 / (3.0 + 3f64.sqrt());
        SteinerTree::new(
            SteinerTopology::star(3),
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![Point2::new(a, a)],
        )
        .unwrap()
    }

    fn shift(dx: f64) -> Perturbation {
        Perturbation::new(vec![dx, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn ten_steps_match_example_two() {
        let report = adapt_stepwise(&example_one(), &shift(0.4), &StepPolicy::steps(10)).unwrap();
        assert_eq!(report.status, RunStatus::Completed);
        assert_eq!(report.records.len(), 11);
        let s = report.final_tree().steiner_points()[0];
        assert!((s.x - 0.433).abs() < 2e-3 && (s.y - 0.050).abs() < 2e-3, "{s}");
        for r in &report.records[1..] {
            assert!((r.delta_t[0] - 0.04).abs() < 1e-15);
        }
        let applied = report.applied_delta_t();
        assert!((applied[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn one_step_equals_single_update() {
        let tree = example_one();
        let p = shift(0.25);
        let report = adapt_stepwise(&tree, &p, &StepPolicy::steps(1)).unwrap();
        let single = adapt_single(&tree, &p, AdaptMode::Pure).unwrap();
        assert_eq!(report.final_tree(), &single.tree);
        assert_eq!(report.records[1].health, single.health);
    }

    #[test]
    fn max_step_norm_fragments() {
        let report = adapt_stepwise(&example_one(), &shift(0.1), &StepPolicy::max_step_norm(0.03)).unwrap();
        assert_eq!(report.steps_taken(), 4);
        assert!(report.records[1..].iter().all(|r| r.delta_t[0] <= 0.03 + 1e-15));
        assert!((report.applied_delta_t()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn edge_fraction_default_policy() {
        let tree = example_one();
        let report = adapt_stepwise(&tree, &shift(0.4), &StepPolicy::default()).unwrap();
        assert_eq!(report.status, RunStatus::Completed);
        for w in report.records.windows(2) {
            let cap = 0.1 * w[0].tree.min_edge_length();
            assert!(w[1].delta_t.iter().all(|d| d.abs() <= cap + 1e-15));
        }
        let s = report.final_tree().steiner_points()[0];
        assert!((s.x - 0.437).abs() < 2e-3 && (s.y - 0.052).abs() < 2e-3, "{s}");
    }

    #[test]
    fn invalid_policies() {
        let tree = example_one();
        for policy in [
            StepPolicy::steps(0),
            StepPolicy::max_step_norm(-1.0),
            StepPolicy {
                condition_limit: 0.5,
                ..Default::default()
            },
            StepPolicy {
                min_edge_fraction: 1.5,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                adapt_stepwise(&tree, &shift(0.1), &policy),
                Err(AdaptError::InvalidPolicy(_))
            ));
        }
    }

    #[test]
    fn low_condition_limit_aborts_after_first_step() {
        let policy = StepPolicy {
            condition_limit: 1.5,
            ..StepPolicy::steps(5)
        };
        let report = adapt_stepwise(&example_one(), &shift(0.1), &policy).unwrap();
        assert_eq!(report.status, RunStatus::AbortedIllConditioned);
        assert_eq!(report.records.len(), 2);
        assert!(report.records[1].health.hessian_condition > 1.5);
    }
}
