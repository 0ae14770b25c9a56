//! JSON documents for instances, perturbations, adaptation reports and
//! derivative dumps, plus CSV traces of stepwise runs.
//!
//! Every document carries `format_version: 1`. Reals are written in the
//! shortest form that parses back to the same `f64`, so encoding followed by
//! decoding is bit-exact.

mod trace;

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::error::Category;
use thiserror::Error;

pub use trace::{emit_trace, write_trace_file, TRACE_FIXED_COLUMNS};

use crate::adaptation::{AdaptationReport, HealthReport, Perturbation, RunStatus, StepRecord};
use crate::tree_model::{unflatten, NodeRef, NodeRefParseError, Point2, SteinerTopology, SteinerTree, TreeError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("unsupported format_version {0}, expected {FORMAT_VERSION}")]
    UnsupportedVersion(u32),
    #[error("steiner positions given without edges")]
    SteinerWithoutEdges,
    #[error(transparent)]
    NodeRef(#[from] NodeRefParseError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("perturbation has {found} terminal displacements, expected {expected}")]
    PerturbationLength { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{target}: {source}")]
    File {
        target: String,
        #[source]
        source: std::io::Error,
    },
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

fn check_version(version: u32) -> Result<(), IoError> {
    if version == FORMAT_VERSION {
        Ok(())
    } else {
        Err(IoError::UnsupportedVersion(version))
    }
}

fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| {
        let (line, column, message) = (e.line(), e.column(), e.to_string());
        match e.classify() {
            Category::Data => IoError::Schema { line, column, message },
            _ => IoError::Parse { line, column, message },
        }
    })
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialise to JSON");
    text.push('\n');
    text
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        target: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    std::fs::write(path, contents).map_err(|source| IoError::File {
        target: path.display().to_string(),
        source,
    })
}

fn pairs(points: &[Point2]) -> Vec<[f64; 2]> {
    points.iter().map(|&p| p.into()).collect()
}

fn points(pairs: &[[f64; 2]]) -> Vec<Point2> {
    pairs.iter().map(|&p| p.into()).collect()
}

/// Terminals, optionally with Steiner points and the edges of a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub terminals: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steiner: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[String; 2]>>,
}

/// A decoded instance document.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Tree(SteinerTree),
    /// Terminals only, with no Steiner points or edges.
    Terminals(Vec<Point2>),
}

impl Instance {
    pub fn terminals(&self) -> &[Point2] {
        match self {
            Instance::Tree(t) => t.terminals(),
            Instance::Terminals(t) => t,
        }
    }

    pub fn n(&self) -> usize {
        self.terminals().len()
    }

    pub fn k(&self) -> usize {
        match self {
            Instance::Tree(t) => t.k(),
            Instance::Terminals(_) => 0,
        }
    }

    pub fn tree(&self) -> Option<&SteinerTree> {
        match self {
            Instance::Tree(t) => Some(t),
            Instance::Terminals(_) => None,
        }
    }
}

impl InstanceDocument {
    pub fn from_tree(tree: &SteinerTree) -> Self {
        InstanceDocument {
            format_version: FORMAT_VERSION,
            terminals: pairs(tree.terminals()),
            steiner: Some(pairs(tree.steiner_points())),
            edges: Some(
                tree.topology()
                    .edges()
                    .map(|(a, b)| [a.to_string(), b.to_string()])
                    .collect(),
            ),
        }
    }

    pub fn from_terminals(terminals: &[Point2]) -> Self {
        InstanceDocument {
            format_version: FORMAT_VERSION,
            terminals: pairs(terminals),
            steiner: None,
            edges: None,
        }
    }

    pub fn to_instance(&self) -> Result<Instance, IoError> {
        check_version(self.format_version)?;
        let terminals = points(&self.terminals);
        if let Some(i) = terminals.iter().position(|p| !p.is_finite()) {
            return Err(TreeError::NonFinite {
                node: NodeRef::Terminal(i),
            }
            .into());
        }
        let Some(edges) = &self.edges else {
            if self.steiner.is_some() {
                return Err(IoError::SteinerWithoutEdges);
            }
            return Ok(Instance::Terminals(terminals));
        };
        let steiner = points(self.steiner.as_deref().unwrap_or_default());
        let edges = edges
            .iter()
            .map(|[a, b]| Ok((a.parse()?, b.parse()?)))
            .collect::<Result<Vec<(NodeRef, NodeRef)>, NodeRefParseError>>()?;
        let topology = SteinerTopology::from_edges(terminals.len(), steiner.len(), &edges);
        Ok(Instance::Tree(SteinerTree::new(topology, terminals, steiner)?))
    }
}

pub fn decode_instance(text: &str) -> Result<Instance, IoError> {
    from_json::<InstanceDocument>(text)?.to_instance()
}

pub fn encode_instance(instance: &Instance) -> String {
    to_json(&match instance {
        Instance::Tree(t) => InstanceDocument::from_tree(t),
        Instance::Terminals(t) => InstanceDocument::from_terminals(t),
    })
}

pub fn encode_tree(tree: &SteinerTree) -> String {
    to_json(&InstanceDocument::from_tree(tree))
}

/// Per-terminal displacements `[dx, dy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationDocument {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub delta_t: Vec<[f64; 2]>,
}

impl PerturbationDocument {
    pub fn from_perturbation(p: &Perturbation) -> Self {
        PerturbationDocument {
            format_version: FORMAT_VERSION,
            delta_t: pairs(&unflatten(p.as_slice())),
        }
    }
}

/// Decodes a perturbation for an instance with `n` terminals.
pub fn decode_perturbation(text: &str, n: usize) -> Result<Perturbation, IoError> {
    let doc: PerturbationDocument = from_json(text)?;
    check_version(doc.format_version)?;
    if doc.delta_t.len() != n {
        return Err(IoError::PerturbationLength {
            expected: n,
            found: doc.delta_t.len(),
        });
    }
    Perturbation::from_points(&points(&doc.delta_t)).map_err(|_| IoError::NonFinite("delta_t"))
}

pub fn encode_perturbation(p: &Perturbation) -> String {
    to_json(&PerturbationDocument::from_perturbation(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusDocument {
    Completed,
    AbortedIllConditioned,
    AbortedDegenerateEdge,
}

impl From<RunStatus> for StatusDocument {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Completed => StatusDocument::Completed,
            RunStatus::AbortedIllConditioned => StatusDocument::AbortedIllConditioned,
            RunStatus::AbortedDegenerateEdge => StatusDocument::AbortedDegenerateEdge,
        }
    }
}

impl From<StatusDocument> for RunStatus {
    fn from(s: StatusDocument) -> Self {
        match s {
            StatusDocument::Completed => RunStatus::Completed,
            StatusDocument::AbortedIllConditioned => RunStatus::AbortedIllConditioned,
            StatusDocument::AbortedDegenerateEdge => RunStatus::AbortedDegenerateEdge,
        }
    }
}

/// JSON has no infinity, so an unbounded condition number is written as
/// `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthDocument {
    pub min_edge_length: f64,
    pub max_steiner_angle_deviation: f64,
    pub hessian_condition: Option<f64>,
    pub positive_definite: bool,
}

impl From<HealthReport> for HealthDocument {
    fn from(h: HealthReport) -> Self {
        HealthDocument {
            min_edge_length: h.min_edge_length,
            max_steiner_angle_deviation: h.max_steiner_angle_deviation,
            hessian_condition: h.hessian_condition.is_finite().then_some(h.hessian_condition),
            positive_definite: h.positive_definite,
        }
    }
}

impl From<HealthDocument> for HealthReport {
    fn from(h: HealthDocument) -> Self {
        HealthReport {
            min_edge_length: h.min_edge_length,
            max_steiner_angle_deviation: h.max_steiner_angle_deviation,
            hessian_condition: h.hessian_condition.unwrap_or(f64::INFINITY),
            positive_definite: h.positive_definite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDocument {
    pub step: usize,
    pub delta_t: Vec<f64>,
    pub delta_s: Vec<f64>,
    pub terminals: Vec<[f64; 2]>,
    pub steiner: Vec<[f64; 2]>,
    pub length: f64,
    pub health: HealthDocument,
}

/// Serialised form of an [`AdaptationReport`]. Every step shares the
/// topology of `final_tree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub status: StatusDocument,
    pub steps: Vec<StepDocument>,
    pub final_tree: InstanceDocument,
}

impl ReportDocument {
    pub fn from_report(report: &AdaptationReport) -> Self {
        ReportDocument {
            format_version: FORMAT_VERSION,
            status: report.status.into(),
            steps: report
                .records
                .iter()
                .map(|r| StepDocument {
                    step: r.step,
                    delta_t: r.delta_t.clone(),
                    delta_s: r.delta_s.clone(),
                    terminals: pairs(r.tree.terminals()),
                    steiner: pairs(r.tree.steiner_points()),
                    length: r.length,
                    health: r.health.into(),
                })
                .collect(),
            final_tree: InstanceDocument::from_tree(report.final_tree()),
        }
    }

    pub fn to_report(&self) -> Result<AdaptationReport, IoError> {
        check_version(self.format_version)?;
        let Instance::Tree(final_tree) = self.final_tree.to_instance()? else {
            return Err(IoError::SteinerWithoutEdges);
        };
        let records = self
            .steps
            .iter()
            .map(|s| {
                Ok(StepRecord {
                    step: s.step,
                    delta_t: s.delta_t.clone(),
                    delta_s: s.delta_s.clone(),
                    tree: final_tree.with_positions(points(&s.terminals), points(&s.steiner))?,
                    health: s.health.into(),
                    length: s.length,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        Ok(AdaptationReport {
            records,
            status: self.status.into(),
        })
    }
}

pub fn encode_report(report: &AdaptationReport) -> String {
    to_json(&ReportDocument::from_report(report))
}

pub fn decode_report(text: &str) -> Result<AdaptationReport, IoError> {
    from_json::<ReportDocument>(text)?.to_report()
}

/// Cost and dense derivative matrices of a tree. `sensitivity` is absent
/// when the Hessian is singular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativesDocument {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub cost: f64,
    pub gradient_s: Vec<f64>,
    pub hessian_ss: Vec<Vec<f64>>,
    pub mixed_ts: Vec<Vec<f64>>,
    pub sensitivity: Option<Vec<Vec<f64>>>,
}

pub fn encode_derivatives(doc: &DerivativesDocument) -> String {
    to_json(doc)
}

pub fn decode_derivatives(text: &str) -> Result<DerivativesDocument, IoError> {
    let doc: DerivativesDocument = from_json(text)?;
    check_version(doc.format_version)?;
    Ok(doc)
}

pub(crate) fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
