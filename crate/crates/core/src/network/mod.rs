//! Hybrid ac/dc network topology.
//!
//! A network is an undirected graph over three node kinds: ac machines, dc
//! buses and dc/ac converters. Ac edges may only touch machines and
//! converters, dc edges only dc buses and converters. The union graph must be
//! connected, while the ac-only and dc-only graphs usually are not; their
//! connected components are the ac and dc subgrids.
//!
//! Nodes and edges are kept in lexicographic id order so that every matrix
//! built from a graph has a reproducible layout.

mod kron;
mod matrices;
mod partition;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::DeviceBlock;

pub use kron::{kron_reduce, reduce_passive_buses, TOL_KRON};
pub use matrices::{ac_graph_matrices, dc_graph_matrices, GraphMatrices};
pub use partition::{partition_subgrids, AcSubgrid, DcSubgrid, SubgridPartition};

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("malformed network file: {0}")]
    Parse(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("edge `{edge}` references unknown node `{node}`")]
    UnknownNode { edge: String, node: String },
    #[error("edge `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("edges `{0}` and `{1}` connect the same pair of nodes")]
    DuplicateEdge(String, String),
    #[error("{port} edge `{edge}` touches node `{node}` of kind {kind}")]
    EdgeKindViolation {
        port: &'static str,
        edge: String,
        node: String,
        kind: NodeKind,
    },
    #[error("edge `{edge}` has non-positive weight {weight}")]
    NonPositiveEdgeWeight { edge: String, weight: f64 },
    #[error("network graph is disconnected: node `{0}` is unreachable from `{1}`")]
    DisconnectedUnionGraph(String, String),
    #[error("passive ac bus `{0}` must be Kron-reduced before building the model")]
    PassiveBusNotReduced(String),
    #[error("interior node `{0}` carries a device and cannot be eliminated")]
    DeviceOnInteriorNode(String),
    #[error("interior block of the Laplacian is singular; nodes {0:?} have no path to the boundary")]
    SingularInterior(Vec<String>),
    #[error("network has no nodes")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    AcMachine,
    DcBus,
    Converter,
    /// Device-free ac bus. Only valid before Kron reduction.
    AcBus,
}

impl NodeKind {
    pub fn is_ac(self) -> bool {
        matches!(self, NodeKind::AcMachine | NodeKind::Converter | NodeKind::AcBus)
    }

    pub fn is_dc(self) -> bool {
        matches!(self, NodeKind::DcBus | NodeKind::Converter)
    }
}

impl std::fmt::Display for NodeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NodeKind::AcMachine => "ac-machine",
            NodeKind::DcBus => "dc-bus",
            NodeKind::Converter => "converter",
            NodeKind::AcBus => "ac-bus",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcEdgeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub from: String,
    pub to: String,
    #[serde(alias = "b", alias = "weight")]
    pub susceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcEdgeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub from: String,
    pub to: String,
    #[serde(alias = "g", alias = "weight")]
    pub conductance: f64,
}

/// Declarative network description; the in-memory image of the JSON network
/// file. All quantities are per-unit on a common base.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Free-form provenance remarks; ignored by the analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub ac_edges: Vec<AcEdgeSpec>,
    #[serde(default)]
    pub dc_edges: Vec<DcEdgeSpec>,
    #[serde(default)]
    pub devices: BTreeMap<String, DeviceBlock>,
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }

    pub fn has_passive_buses(&self) -> bool {
        self.nodes.iter().any(|n| n.kind == NodeKind::AcBus)
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        self.nodes.iter().find(|n| n.id == id).map(|n| n.kind)
    }
}

fn default_edge_id(from: &str, to: &str) -> String {
    format!("{from}-{to}")
}

impl AcEdgeSpec {
    pub fn edge_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| default_edge_id(&self.from, &self.to))
    }
}

impl DcEdgeSpec {
    pub fn edge_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| default_edge_id(&self.from, &self.to))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

/// An oriented weighted edge; `from` and `to` index [`NetworkGraph::nodes`].
/// The incidence column of the edge has +1 at `from` and -1 at `to`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl Edge {
    pub fn other(&self, node: usize) -> usize {
        if self.from == node {
            self.to
        } else {
            self.from
        }
    }

    pub fn touches(&self, node: usize) -> bool {
        self.from == node || self.to == node
    }
}

/// Validated network graph with deterministic orderings.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    ac_edges: Vec<Edge>,
    dc_edges: Vec<Edge>,
}

impl NetworkGraph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    pub fn id(&self, index: usize) -> &str {
        &self.nodes[index].id
    }

    pub fn kind(&self, index: usize) -> NodeKind {
        self.nodes[index].kind
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ac_edges(&self) -> &[Edge] {
        &self.ac_edges
    }

    pub fn dc_edges(&self) -> &[Edge] {
        &self.dc_edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == kind).collect()
    }
}

struct RawEdge {
    id: String,
    from: String,
    to: String,
    weight: f64,
}

/// Validates a spec and returns the graph with nodes and edges sorted by id.
pub fn build_network(spec: &NetworkSpec) -> Result<NetworkGraph, NetworkError> {
    if spec.nodes.is_empty() {
        return Err(NetworkError::Empty);
    }
    let mut sorted: Vec<&NodeSpec> = spec.nodes.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in sorted.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(NetworkError::DuplicateId(pair[0].id.clone()));
        }
    }
    if let Some(passive) = sorted.iter().find(|n| n.kind == NodeKind::AcBus) {
        return Err(NetworkError::PassiveBusNotReduced(passive.id.clone()));
    }
    let nodes: Vec<Node> = sorted
        .iter()
        .map(|n| Node {
            id: n.id.clone(),
            kind: n.kind,
        })
        .collect();
    let index: BTreeMap<String, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();

    let ac_raw = spec.ac_edges.iter().map(|e| RawEdge {
        id: e.edge_id(),
        from: e.from.clone(),
        to: e.to.clone(),
        weight: e.susceptance,
    });
    let dc_raw = spec.dc_edges.iter().map(|e| RawEdge {
        id: e.edge_id(),
        from: e.from.clone(),
        to: e.to.clone(),
        weight: e.conductance,
    });
    let mut edge_ids = BTreeSet::new();
    let ac_edges = check_edges(ac_raw, "ac", &nodes, &index, &mut edge_ids, NodeKind::is_ac)?;
    let dc_edges = check_edges(dc_raw, "dc", &nodes, &index, &mut edge_ids, NodeKind::is_dc)?;

    let graph = NetworkGraph {
        nodes,
        index,
        ac_edges,
        dc_edges,
    };
    check_connected(&graph)?;
    Ok(graph)
}

fn check_edges(
    raw: impl Iterator<Item = RawEdge>,
    port: &'static str,
    nodes: &[Node],
    index: &BTreeMap<String, usize>,
    edge_ids: &mut BTreeSet<String>,
    allowed: fn(NodeKind) -> bool,
) -> Result<Vec<Edge>, NetworkError> {
    let mut edges = Vec::new();
    let mut pairs: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for e in raw {
        if !edge_ids.insert(e.id.clone()) {
            return Err(NetworkError::DuplicateId(e.id));
        }
        let lookup = |node: &str| {
            index.get(node).copied().ok_or_else(|| NetworkError::UnknownNode {
                edge: e.id.clone(),
                node: node.to_string(),
            })
        };
        let from = lookup(&e.from)?;
        let to = lookup(&e.to)?;
        if from == to {
            return Err(NetworkError::SelfLoop(e.id));
        }
        for &n in &[from, to] {
            if !allowed(nodes[n].kind) {
                return Err(NetworkError::EdgeKindViolation {
                    port,
                    edge: e.id.clone(),
                    node: nodes[n].id.clone(),
                    kind: nodes[n].kind,
                });
            }
        }
        if !(e.weight.is_finite() && e.weight > 0.0) {
            return Err(NetworkError::NonPositiveEdgeWeight {
                edge: e.id,
                weight: e.weight,
            });
        }
        let key = (from.min(to), from.max(to));
        if let Some(prev) = pairs.insert(key, e.id.clone()) {
            return Err(NetworkError::DuplicateEdge(prev, e.id));
        }
        edges.push(Edge {
            id: e.id,
            from,
            to,
            weight: e.weight,
        });
    }
    edges.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(edges)
}

fn check_connected(graph: &NetworkGraph) -> Result<(), NetworkError> {
    let n = graph.len();
    let mut adjacency = vec![Vec::new(); n];
    for e in graph.ac_edges.iter().chain(&graph.dc_edges) {
        adjacency[e.from].push(e.to);
        adjacency[e.to].push(e.from);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &w in &adjacency[u] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(missing) => Err(NetworkError::DisconnectedUnionGraph(
            graph.id(missing).to_string(),
            graph.id(0).to_string(),
        )),
        None => Ok(()),
    }
}
