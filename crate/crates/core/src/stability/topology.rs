//! Topology-only checks on one ac subgrid.
//!
//! Subgrid nodes are split into three groups:
//!
//! - converter-dominated (at least as many converters as machines):
//!   `D` = converters, `C` = machines, `F` empty;
//! - machine-dominated: `D` = machines and converters with losses or a
//!   responsive source, `C` = the remaining machines, `F` = the remaining
//!   converters.
//!
//! The reduced graph keeps every subgrid edge except those inside `C` or
//! inside `D`. Node removal then repeatedly deletes a `C` node that is the
//! only neighbour of some `D` node; if every `C` node goes, the rank
//! condition on the subgrid Laplacian holds for all positive edge weights.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::devices::AcRoles;
use crate::network::{AcSubgrid, NetworkGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Group {
    D,
    C,
    F,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Def1Partition {
    pub subgrid: usize,
    pub converter_dominated: bool,
    pub d: Vec<usize>,
    pub c: Vec<usize>,
    pub f: Vec<usize>,
}

impl Def1Partition {
    pub fn group(&self, node: usize) -> Option<Group> {
        if self.d.binary_search(&node).is_ok() {
            Some(Group::D)
        } else if self.c.binary_search(&node).is_ok() {
            Some(Group::C)
        } else if self.f.binary_search(&node).is_ok() {
            Some(Group::F)
        } else {
            None
        }
    }
}

pub fn def1_partition(subgrid: &AcSubgrid, roles: &AcRoles) -> Def1Partition {
    let converter_dominated = subgrid.converters.len() >= subgrid.machines.len();
    let (mut d, c, f) = if converter_dominated {
        (subgrid.converters.clone(), subgrid.machines.clone(), Vec::new())
    } else {
        let mut d = roles.machines.stabilizing();
        d.extend(roles.converters.stabilizing());
        (d, roles.machines.other.clone(), roles.converters.other.clone())
    };
    d.sort_unstable();
    Def1Partition {
        subgrid: subgrid.index,
        converter_dominated,
        d,
        c,
        f,
    }
}

/// Subgrid nodes and the retained edges (indices into the graph's ac edges).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReducedGraph {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

impl ReducedGraph {
    pub fn degree(&self, graph: &NetworkGraph, node: usize) -> usize {
        self.edges.iter().filter(|&&e| graph.ac_edges()[e].touches(node)).count()
    }

    pub fn neighbours(&self, graph: &NetworkGraph, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .map(|&e| &graph.ac_edges()[e])
            .filter(|e| e.touches(node))
            .map(|e| e.other(node))
            .collect()
    }
}

pub fn reduced_graph(graph: &NetworkGraph, subgrid: &AcSubgrid, def1: &Def1Partition) -> ReducedGraph {
    let edges = subgrid
        .edges
        .iter()
        .copied()
        .filter(|&e| {
            let edge = &graph.ac_edges()[e];
            let (a, b) = (def1.group(edge.from), def1.group(edge.to));
            !(a == b && matches!(a, Some(Group::C) | Some(Group::D)))
        })
        .collect();
    let mut nodes = subgrid.nodes();
    nodes.sort_unstable();
    ReducedGraph { nodes, edges }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Removal {
    /// The `D` node whose only remaining edge led to `removed`.
    pub single_edge_node: usize,
    pub removed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Algorithm1Result {
    pub emptied: bool,
    pub removals: Vec<Removal>,
    pub remaining: Vec<usize>,
}

/// Node removal. Among all `D` nodes with exactly one remaining edge, and
/// that edge leading into the remaining `C` set, the smallest node index is
/// taken first. Removing a node drops all of its edges.
pub fn algorithm1(graph: &NetworkGraph, reduced: &ReducedGraph, def1: &Def1Partition) -> Algorithm1Result {
    let mut remaining: BTreeSet<usize> = def1.c.iter().copied().collect();
    let mut gone: BTreeSet<usize> = BTreeSet::new();
    let mut removals = Vec::new();
    loop {
        let step = def1.d.iter().find_map(|&l| {
            let live: Vec<usize> = reduced
                .neighbours(graph, l)
                .into_iter()
                .filter(|n| !gone.contains(n))
                .collect();
            match live.as_slice() {
                [j] if remaining.contains(j) => Some((l, *j)),
                _ => None,
            }
        });
        let Some((l, j)) = step else { break };
        remaining.remove(&j);
        gone.insert(j);
        removals.push(Removal {
            single_edge_node: l,
            removed: j,
        });
    }
    Algorithm1Result {
        emptied: remaining.is_empty(),
        removals,
        remaining: remaining.into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorollaryNode {
    pub node: usize,
    /// Adjacent to a `D` node whose only reduced-graph edge leads here.
    pub case1: bool,
    /// Shares a cycle with such a node (possibly itself).
    pub case2: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corollary1Result {
    pub pass: bool,
    pub nodes: Vec<CorollaryNode>,
}

/// Cycle-based sufficient condition, evaluated on the reduced graph.
///
/// Case 1 holds for a `C` node with an edge to a single-edge `D` node. Case
/// 2 holds when the node itself satisfies case 1 and lies on a cycle, or when
/// it shares a cycle with a case-1 node along a chain of `D` nodes that each
/// have exactly two edges, both to `C` nodes. The second form is what makes
/// node removal propagate around the cycle; cycles through `F` nodes or
/// through `D` nodes of higher degree do not guarantee it.
pub fn corollary1(graph: &NetworkGraph, reduced: &ReducedGraph, def1: &Def1Partition) -> Corollary1Result {
    let edges = graph.ac_edges();
    let single_edge_d: BTreeSet<usize> = def1
        .d
        .iter()
        .copied()
        .filter(|&d| reduced.degree(graph, d) == 1)
        .collect();
    let qualifies = |c: usize| reduced.neighbours(graph, c).iter().any(|n| single_edge_d.contains(n));

    // Cycles of the reduced graph itself.
    let local = |n: usize| reduced.nodes.binary_search(&n).expect("subgrid node");
    let pairs: Vec<(usize, usize)> = reduced
        .edges
        .iter()
        .map(|&e| (local(edges[e].from), local(edges[e].to)))
        .collect();
    let on_cycle = nodes_on_cycles(reduced.nodes.len(), &pairs);

    // Auxiliary multigraph on C: one edge per D node with two edges, both into C.
    let c_local = |n: usize| def1.c.binary_search(&n).ok();
    let mut h_edges = Vec::new();
    for &d in &def1.d {
        let nb = reduced.neighbours(graph, d);
        if let [a, b] = nb.as_slice() {
            if let (Some(x), Some(y)) = (c_local(*a), c_local(*b)) {
                if x != y {
                    h_edges.push((x, y));
                }
            }
        }
    }
    let h_blocks: Vec<BTreeSet<usize>> = biconnected_blocks(def1.c.len(), &h_edges)
        .into_iter()
        .filter(|block| block.len() >= 2)
        .map(|block| block.iter().flat_map(|&e| [h_edges[e].0, h_edges[e].1]).collect())
        .collect();
    let qualifying: Vec<bool> = def1.c.iter().map(|&c| qualifies(c)).collect();

    let nodes: Vec<CorollaryNode> = def1
        .c
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let case1 = qualifying[k];
            let self_cycle = case1 && on_cycle[local(c)];
            let shared = h_blocks
                .iter()
                .any(|b| b.contains(&k) && b.iter().any(|&o| o != k && qualifying[o]));
            CorollaryNode {
                node: c,
                case1,
                case2: self_cycle || shared,
            }
        })
        .collect();
    Corollary1Result {
        pass: nodes.iter().all(|n| n.case1 || n.case2),
        nodes,
    }
}

/// Whether each node is incident to an edge that lies on some cycle.
fn nodes_on_cycles(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let mut on = vec![false; n];
    for block in biconnected_blocks(n, edges) {
        if block.len() >= 2 {
            for e in block {
                on[edges[e].0] = true;
                on[edges[e].1] = true;
            }
        }
    }
    on
}

/// Edge sets of the biconnected blocks of an undirected multigraph. Parallel
/// edges form a block of their own; a block with a single edge is a bridge.
pub fn biconnected_blocks(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, &(a, b)) in edges.iter().enumerate() {
        adjacency[a].push((b, k));
        adjacency[b].push((a, k));
    }
    let mut state = Tarjan {
        adjacency,
        disc: vec![usize::MAX; n],
        low: vec![0; n],
        time: 0,
        stack: Vec::new(),
        blocks: Vec::new(),
    };
    for root in 0..n {
        if state.disc[root] == usize::MAX {
            state.visit(root, None);
        }
    }
    state.blocks
}

struct Tarjan {
    adjacency: Vec<Vec<(usize, usize)>>,
    disc: Vec<usize>,
    low: Vec<usize>,
    time: usize,
    stack: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Tarjan {
    fn visit(&mut self, u: usize, parent_edge: Option<usize>) {
        self.disc[u] = self.time;
        self.low[u] = self.time;
        self.time += 1;
        for i in 0..self.adjacency[u].len() {
            let (w, e) = self.adjacency[u][i];
            if Some(e) == parent_edge {
                continue;
            }
            if self.disc[w] == usize::MAX {
                self.stack.push(e);
                self.visit(w, Some(e));
                self.low[u] = self.low[u].min(self.low[w]);
                if self.low[w] >= self.disc[u] {
                    let mut block = Vec::new();
                    while let Some(top) = self.stack.pop() {
                        block.push(top);
                        if top == e {
                            break;
                        }
                    }
                    block.sort_unstable();
                    self.blocks.push(block);
                }
            } else if self.disc[w] < self.disc[u] {
                self.stack.push(e);
                self.low[u] = self.low[u].min(self.disc[w]);
            }
        }
    }
}
