use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Reference to a node of a Steiner tree by kind and zero-based ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Terminal(usize),
    Steiner(usize),
}

impl NodeRef {
    pub fn index(&self) -> usize {
        match *self {
            NodeRef::Terminal(i) | NodeRef::Steiner(i) => i,
        }
    }

    pub fn is_steiner(&self) -> bool {
        matches!(self, NodeRef::Steiner(_))
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Terminal(i) => write!(f, "t{i}"),
            NodeRef::Steiner(i) => write!(f, "s{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid node reference {0:?}: expected \"t<index>\" or \"s<index>\"")]
pub struct NodeRefParseError(pub String);

impl FromStr for NodeRef {
    type Err = NodeRefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || NodeRefParseError(s.to_string());
        let (kind, digits) = s.split_at_checked(1).ok_or_else(err)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let index: usize = digits.parse().map_err(|_| err())?;
        match kind {
            "t" => Ok(NodeRef::Terminal(index)),
            "s" => Ok(NodeRef::Steiner(index)),
            _ => Err(err()),
        }
    }
}

/// Combinatorial structure of a Steiner tree.
///
/// Edges are kept in three groups: terminal–terminal pairs `(ti, tj)`,
/// terminal–Steiner pairs `(terminal, steiner)` and Steiner–Steiner pairs
/// `(si, sj)`. Construction does not check anything; use
/// [`validate_topology`] to confirm the structure is a Steiner tree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SteinerTopology {
    pub n: usize,
    pub k: usize,
    pub edges_t: Vec<(usize, usize)>,
    pub edges_ts: Vec<(usize, usize)>,
    pub edges_s: Vec<(usize, usize)>,
}

impl SteinerTopology {
    /// Sorts a list of node-pair edges into the three edge groups.
    pub fn from_edges(n: usize, k: usize, edges: &[(NodeRef, NodeRef)]) -> Self {
        let mut topo = SteinerTopology {
            n,
            k,
            ..Default::default()
        };
        for &(a, b) in edges {
            match (a, b) {
                (NodeRef::Terminal(i), NodeRef::Terminal(j)) => topo.edges_t.push((i, j)),
                (NodeRef::Terminal(t), NodeRef::Steiner(s))
                | (NodeRef::Steiner(s), NodeRef::Terminal(t)) => topo.edges_ts.push((t, s)),
                (NodeRef::Steiner(i), NodeRef::Steiner(j)) => topo.edges_s.push((i, j)),
            }
        }
        topo
    }

    /// A single Steiner point joined to every terminal.
    pub fn star(n: usize) -> Self {
        SteinerTopology {
            n,
            k: 1,
            edges_ts: (0..n).map(|t| (t, 0)).collect(),
            ..Default::default()
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges_t.len() + self.edges_ts.len() + self.edges_s.len()
    }

    /// All edges as node pairs, in the order E_T, E_TS, E_S.
    pub fn edges(&self) -> impl Iterator<Item = (NodeRef, NodeRef)> + '_ {
        let t = self
            .edges_t
            .iter()
            .map(|&(a, b)| (NodeRef::Terminal(a), NodeRef::Terminal(b)));
        let ts = self
            .edges_ts
            .iter()
            .map(|&(a, b)| (NodeRef::Terminal(a), NodeRef::Steiner(b)));
        let s = self
            .edges_s
            .iter()
            .map(|&(a, b)| (NodeRef::Steiner(a), NodeRef::Steiner(b)));
        t.chain(ts).chain(s)
    }

    /// Nodes adjacent to `node`, in edge order.
    pub fn neighbors(&self, node: NodeRef) -> Vec<NodeRef> {
        self.edges()
            .filter_map(|(a, b)| {
                if a == node {
                    Some(b)
                } else if b == node {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn degree(&self, node: NodeRef) -> usize {
        self.edges().filter(|&(a, b)| a == node || b == node).count()
    }

    fn in_range(&self, node: NodeRef) -> bool {
        match node {
            NodeRef::Terminal(i) => i < self.n,
            NodeRef::Steiner(i) => i < self.k,
        }
    }

    /// Dense node id: terminals first, then Steiner points.
    pub(crate) fn node_id(&self, node: NodeRef) -> usize {
        match node {
            NodeRef::Terminal(i) => i,
            NodeRef::Steiner(i) => self.n + i,
        }
    }
}

/// A broken structural rule found by [`validate_topology`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("a tree needs at least two terminals, found n = {n}")]
    TooFewTerminals { n: usize },
    #[error("k ≤ n−2 violated: n = {n}, k = {k}")]
    TooManySteinerPoints { n: usize, k: usize },
    #[error("index out of range: {node}")]
    IndexOutOfRange { node: NodeRef },
    #[error("self-loop at {node}")]
    SelfLoop { node: NodeRef },
    #[error("duplicate edge ({a}, {b})")]
    DuplicateEdge { a: NodeRef, b: NodeRef },
    #[error("edge count must be n + k − 1 = {expected}, found {found}")]
    EdgeCount { expected: usize, found: usize },
    #[error("graph is not connected: {node} is unreachable from t0")]
    Disconnected { node: NodeRef },
    #[error("Steiner point s{index} has degree {degree}, expected exactly 3")]
    SteinerDegree { index: usize, degree: usize },
    #[error("terminal t{index} has degree {degree}, expected between 1 and 3")]
    TerminalDegree { index: usize, degree: usize },
}

/// Checks every structural rule of a Steiner topology and reports all
/// violations found.
pub fn validate_topology(topology: &SteinerTopology) -> Result<(), Vec<Violation>> {
    let (n, k) = (topology.n, topology.k);
    let mut violations = Vec::new();

    if n < 2 {
        violations.push(Violation::TooFewTerminals { n });
    } else if k > n - 2 {
        violations.push(Violation::TooManySteinerPoints { n, k });
    }

    let mut seen = BTreeSet::new();
    let mut usable = Vec::new();
    for (a, b) in topology.edges() {
        let mut ok = true;
        for node in [a, b] {
            if !topology.in_range(node) {
                violations.push(Violation::IndexOutOfRange { node });
                ok = false;
            }
        }
        if a == b {
            violations.push(Violation::SelfLoop { node: a });
            ok = false;
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        if !seen.insert(key) {
            violations.push(Violation::DuplicateEdge { a: key.0, b: key.1 });
            ok = false;
        }
        if ok {
            usable.push((a, b));
        }
    }

    let expected = (n + k).saturating_sub(1);
    if topology.edge_count() != expected {
        violations.push(Violation::EdgeCount {
            expected,
            found: topology.edge_count(),
        });
    }

    let total = n + k;
    let mut adjacency = vec![Vec::new(); total];
    for &(a, b) in &usable {
        let (ia, ib) = (topology.node_id(a), topology.node_id(b));
        adjacency[ia].push(ib);
        adjacency[ib].push(ia);
    }

    if total > 0 {
        let mut visited = vec![false; total];
        let mut queue = VecDeque::from([0]);
        visited[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(missing) = visited.iter().position(|v| !v) {
            let node = if missing < n {
                NodeRef::Terminal(missing)
            } else {
                NodeRef::Steiner(missing - n)
            };
            violations.push(Violation::Disconnected { node });
        }
    }

    for (index, adj) in adjacency.iter().enumerate().take(n) {
        let degree = adj.len();
        if !(1..=3).contains(&degree) {
            violations.push(Violation::TerminalDegree { index, degree });
        }
    }
    for index in 0..k {
        let degree = adjacency[n + index].len();
        if degree != 3 {
            violations.push(Violation::SteinerDegree { index, degree });
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Connected components of the subgraph induced on Steiner points by
/// Steiner–Steiner edges. Members are ascending and components are ordered by
/// their smallest member.
pub fn steiner_forest_components(topology: &SteinerTopology) -> Vec<Vec<usize>> {
    let k = topology.k;
    let mut adjacency = vec![Vec::new(); k];
    for &(a, b) in &topology.edges_s {
        if a < k && b < k {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }
    let mut label = vec![usize::MAX; k];
    let mut components = Vec::new();
    for start in 0..k {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        label[start] = id;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if label[w] == usize::MAX {
                    label[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}
