use std::collections::VecDeque;

use serde::Serialize;

use super::{Edge, NetworkGraph, NodeKind};

/// Connected component of the ac graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AcSubgrid {
    pub index: usize,
    /// Machine node indices, ascending.
    pub machines: Vec<usize>,
    /// Converter node indices, ascending.
    pub converters: Vec<usize>,
    /// Indices into [`NetworkGraph::ac_edges`], ascending.
    pub edges: Vec<usize>,
}

impl AcSubgrid {
    /// Machines first, then converters. This is the row order of the
    /// subgrid incidence and Laplacian matrices.
    pub fn nodes(&self) -> Vec<usize> {
        self.machines.iter().chain(&self.converters).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.machines.len() + self.converters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, node: usize) -> bool {
        self.machines.binary_search(&node).is_ok() || self.converters.binary_search(&node).is_ok()
    }
}

/// Connected component of the dc graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DcSubgrid {
    pub index: usize,
    /// Converter node indices, ascending.
    pub converters: Vec<usize>,
    /// Dc bus node indices, ascending.
    pub buses: Vec<usize>,
    /// Indices into [`NetworkGraph::dc_edges`], ascending.
    pub edges: Vec<usize>,
}

impl DcSubgrid {
    /// Converters first, then dc buses.
    pub fn nodes(&self) -> Vec<usize> {
        self.converters.iter().chain(&self.buses).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.converters.len() + self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, node: usize) -> bool {
        self.converters.binary_search(&node).is_ok() || self.buses.binary_search(&node).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubgridPartition {
    pub ac: Vec<AcSubgrid>,
    pub dc: Vec<DcSubgrid>,
    /// For every graph node, the ac subgrid it belongs to (machines and converters).
    ac_of: Vec<Option<usize>>,
    /// For every graph node, the dc subgrid it belongs to (dc buses and converters).
    dc_of: Vec<Option<usize>>,
}

impl SubgridPartition {
    pub fn ac_subgrid_of(&self, node: usize) -> Option<usize> {
        self.ac_of[node]
    }

    pub fn dc_subgrid_of(&self, node: usize) -> Option<usize> {
        self.dc_of[node]
    }
}

/// Splits the ac and dc graphs into connected components.
///
/// Components are discovered by breadth-first search seeded in node order, so
/// subgrid indices follow the smallest node id they contain. A converter
/// without dc edges becomes a singleton dc subgrid; likewise a converter
/// without ac edges is a singleton ac subgrid.
pub fn partition_subgrids(graph: &NetworkGraph) -> SubgridPartition {
    let n = graph.len();
    let ac_comp = components(n, graph.ac_edges(), |k| k.is_ac(), graph);
    let dc_comp = components(n, graph.dc_edges(), |k| k.is_dc(), graph);

    let mut ac: Vec<AcSubgrid> = (0..ac_comp.count)
        .map(|index| AcSubgrid {
            index,
            machines: vec![],
            converters: vec![],
            edges: vec![],
        })
        .collect();
    let mut dc: Vec<DcSubgrid> = (0..dc_comp.count)
        .map(|index| DcSubgrid {
            index,
            converters: vec![],
            buses: vec![],
            edges: vec![],
        })
        .collect();

    for node in 0..n {
        if let Some(c) = ac_comp.of[node] {
            match graph.kind(node) {
                NodeKind::AcMachine => ac[c].machines.push(node),
                NodeKind::Converter => ac[c].converters.push(node),
                _ => {}
            }
        }
        if let Some(c) = dc_comp.of[node] {
            match graph.kind(node) {
                NodeKind::DcBus => dc[c].buses.push(node),
                NodeKind::Converter => dc[c].converters.push(node),
                _ => {}
            }
        }
    }
    for (k, e) in graph.ac_edges().iter().enumerate() {
        let c = ac_comp.of[e.from].expect("ac edge endpoints are ac nodes");
        ac[c].edges.push(k);
    }
    for (k, e) in graph.dc_edges().iter().enumerate() {
        let c = dc_comp.of[e.from].expect("dc edge endpoints are dc nodes");
        dc[c].edges.push(k);
    }

    SubgridPartition {
        ac,
        dc,
        ac_of: ac_comp.of,
        dc_of: dc_comp.of,
    }
}

struct Components {
    of: Vec<Option<usize>>,
    count: usize,
}

fn components(
    n: usize,
    edges: &[Edge],
    member: impl Fn(NodeKind) -> bool,
    graph: &NetworkGraph,
) -> Components {
    let mut adjacency = vec![Vec::new(); n];
    for e in edges {
        adjacency[e.from].push(e.to);
        adjacency[e.to].push(e.from);
    }
    let mut of = vec![None; n];
    let mut count = 0;
    for start in 0..n {
        if !member(graph.kind(start)) || of[start].is_some() {
            continue;
        }
        of[start] = Some(count);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &w in &adjacency[u] {
                if of[w].is_none() {
                    of[w] = Some(count);
                    queue.push_back(w);
                }
            }
        }
        count += 1;
    }
    Components { of, count }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, AcEdgeSpec, DcEdgeSpec, NetworkSpec, NodeSpec};

    fn spec(nodes: &[(&str, NodeKind)], ac: &[(&str, &str)], dc: &[(&str, &str)]) -> NetworkSpec {
        NetworkSpec {
            nodes: nodes
                .iter()
                .map(|(id, kind)| NodeSpec {
                    id: id.to_string(),
                    kind: *kind,
                })
                .collect(),
            ac_edges: ac
                .iter()
                .map(|(f, t)| AcEdgeSpec {
                    id: None,
                    from: f.to_string(),
                    to: t.to_string(),
                    susceptance: 1.0,
                })
                .collect(),
            dc_edges: dc
                .iter()
                .map(|(f, t)| DcEdgeSpec {
                    id: None,
                    from: f.to_string(),
                    to: t.to_string(),
                    conductance: 1.0,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn machines_only_network_has_one_ac_subgrid() {
        use NodeKind::AcMachine;
        let g = build_network(&spec(
            &[("1", AcMachine), ("2", AcMachine), ("3", AcMachine)],
            &[("1", "2"), ("2", "3")],
            &[],
        ))
        .unwrap();
        let p = partition_subgrids(&g);
        assert_eq!(p.ac.len(), 1);
        assert_eq!(p.dc.len(), 0);
        assert_eq!(p.ac[0].edges, vec![0, 1]);
    }

    #[test]
    fn converter_without_dc_edges_is_singleton_dc_subgrid() {
        use NodeKind::*;
        let g = build_network(&spec(&[("c", Converter), ("m", AcMachine)], &[("m", "c")], &[])).unwrap();
        let p = partition_subgrids(&g);
        assert_eq!(p.ac.len(), 1);
        assert_eq!(p.dc.len(), 1);
        let c = g.index_of("c").unwrap();
        assert_eq!(p.dc[0].converters, vec![c]);
        assert!(p.dc[0].buses.is_empty());
        assert!(p.dc[0].edges.is_empty());
        assert_eq!(p.dc_subgrid_of(c), Some(0));
        assert_eq!(p.dc_subgrid_of(g.index_of("m").unwrap()), None);
    }

    #[test]
    fn two_areas_linked_by_hvdc() {
        use NodeKind::*;
        let g = build_network(&spec(
            &[
                ("1", AcMachine),
                ("10", Converter),
                ("11", AcMachine),
                ("20", Converter),
                ("30", DcBus),
            ],
            &[("1", "10"), ("11", "20")],
            &[("10", "30"), ("30", "20")],
        ))
        .unwrap();
        let p = partition_subgrids(&g);
        assert_eq!(p.ac.len(), 2);
        assert_eq!(p.dc.len(), 1);
        let ids = |v: &[usize]| v.iter().map(|&i| g.id(i).to_string()).collect::<Vec<_>>();
        assert_eq!(ids(&p.ac[0].nodes()), vec!["1", "10"]);
        assert_eq!(ids(&p.ac[1].nodes()), vec!["11", "20"]);
        assert_eq!(ids(&p.dc[0].nodes()), vec!["10", "20", "30"]);
    }
}
