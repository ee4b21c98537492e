//! Kron reduction of the ac network onto a boundary node set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;

use super::{AcEdgeSpec, NetworkError, NetworkSpec, NodeKind};

/// Reduced edges with |weight| below this are treated as round-off and dropped.
pub const TOL_KRON: f64 = 1e-10;

/// Eliminates every ac node outside `boundary` by Schur complement of the ac
/// Laplacian. The off-diagonal entries of the reduced Laplacian become the
/// new ac edge weights; dc edges and device blocks pass through unchanged.
///
/// An edge between two boundary nodes keeps its id when it existed before the
/// reduction; new edges are named `from-to` with endpoints in id order.
pub fn kron_reduce(spec: &NetworkSpec, boundary: &BTreeSet<String>) -> Result<NetworkSpec, NetworkError> {
    let interior: Vec<String> = spec
        .nodes
        .iter()
        .filter(|n| n.kind.is_ac() && !boundary.contains(&n.id))
        .map(|n| n.id.clone())
        .collect();
    if interior.is_empty() {
        return Ok(spec.clone());
    }
    for id in &interior {
        let kind = spec.node_kind(id).expect("interior node exists");
        let has_dc_edge = spec.dc_edges.iter().any(|e| &e.from == id || &e.to == id);
        if spec.devices.contains_key(id) || kind == NodeKind::Converter || has_dc_edge {
            return Err(NetworkError::DeviceOnInteriorNode(id.clone()));
        }
    }

    let ac_nodes: Vec<String> = spec
        .nodes
        .iter()
        .filter(|n| n.kind.is_ac())
        .map(|n| n.id.clone())
        .collect();
    let pos: BTreeMap<&str, usize> = ac_nodes.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let n = ac_nodes.len();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    let mut adjacency = vec![Vec::new(); n];
    for e in &spec.ac_edges {
        let (Some(&i), Some(&j)) = (pos.get(e.from.as_str()), pos.get(e.to.as_str())) else {
            return Err(NetworkError::UnknownNode {
                edge: e.edge_id(),
                node: if pos.contains_key(e.from.as_str()) { e.to.clone() } else { e.from.clone() },
            });
        };
        let w = e.susceptance;
        if !(w.is_finite() && w > 0.0) {
            return Err(NetworkError::NonPositiveEdgeWeight {
                edge: e.edge_id(),
                weight: w,
            });
        }
        lap[(i, i)] += w;
        lap[(j, j)] += w;
        lap[(i, j)] -= w;
        lap[(j, i)] -= w;
        adjacency[i].push(j);
        adjacency[j].push(i);
    }

    let is_interior: Vec<bool> = ac_nodes.iter().map(|id| !boundary.contains(id)).collect();
    check_interior_reaches_boundary(&ac_nodes, &adjacency, &is_interior)?;

    let inner: Vec<usize> = (0..n).filter(|&i| is_interior[i]).collect();
    let outer: Vec<usize> = (0..n).filter(|&i| !is_interior[i]).collect();
    let l_ii = lap.select_rows(&inner).select_columns(&inner);
    let l_ib = lap.select_rows(&inner).select_columns(&outer);
    let l_bb = lap.select_rows(&outer).select_columns(&outer);
    let chol = l_ii
        .cholesky()
        .ok_or_else(|| NetworkError::SingularInterior(inner.iter().map(|&i| ac_nodes[i].clone()).collect()))?;
    let reduced = l_bb - l_ib.transpose() * chol.solve(&l_ib);

    let mut existing: BTreeMap<(String, String), String> = BTreeMap::new();
    for e in &spec.ac_edges {
        let key = ordered(&e.from, &e.to);
        existing.insert(key, e.edge_id());
    }
    let mut ac_edges = Vec::new();
    for a in 0..outer.len() {
        for b in (a + 1)..outer.len() {
            let w = -reduced[(a, b)];
            if w.abs() < TOL_KRON {
                continue;
            }
            let (from, to) = ordered(&ac_nodes[outer[a]], &ac_nodes[outer[b]]);
            let id = existing
                .get(&(from.clone(), to.clone()))
                .cloned()
                .unwrap_or_else(|| format!("{from}-{to}"));
            ac_edges.push(AcEdgeSpec {
                id: Some(id),
                from,
                to,
                susceptance: w,
            });
        }
    }
    ac_edges.sort_by_key(|e| e.edge_id());

    let removed: BTreeSet<&String> = interior.iter().collect();
    Ok(NetworkSpec {
        name: spec.name.clone(),
        notes: spec.notes.clone(),
        nodes: spec.nodes.iter().filter(|n| !removed.contains(&n.id)).cloned().collect(),
        ac_edges,
        dc_edges: spec.dc_edges.clone(),
        devices: spec.devices.clone(),
    })
}

/// Eliminates every passive `ac-bus` node.
pub fn reduce_passive_buses(spec: &NetworkSpec) -> Result<NetworkSpec, NetworkError> {
    let boundary = spec
        .nodes
        .iter()
        .filter(|n| n.kind != NodeKind::AcBus)
        .map(|n| n.id.clone())
        .collect();
    kron_reduce(spec, &boundary)
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn check_interior_reaches_boundary(
    ids: &[String],
    adjacency: &[Vec<usize>],
    is_interior: &[bool],
) -> Result<(), NetworkError> {
    let n = ids.len();
    let mut reached = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| !is_interior[i]).collect();
    for &i in &queue {
        reached[i] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &w in &adjacency[u] {
            if !reached[w] {
                reached[w] = true;
                queue.push_back(w);
            }
        }
    }
    let stranded: Vec<String> = (0..n).filter(|&i| !reached[i]).map(|i| ids[i].clone()).collect();
    if stranded.is_empty() {
        Ok(())
    } else {
        Err(NetworkError::SingularInterior(stranded))
    }
}
