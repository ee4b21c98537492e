use nalgebra::{DMatrix, DVector};

use super::{AcSubgrid, DcSubgrid, Edge, NetworkGraph};

/// Incidence, weight and Laplacian matrices of one subgrid.
///
/// Row `r` of `incidence` and `laplacian` corresponds to graph node
/// `nodes[r]`; column `k` of `incidence` to edge `edges[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
    pub incidence: DMatrix<f64>,
    pub weights: DVector<f64>,
    pub laplacian: DMatrix<f64>,
}

impl GraphMatrices {
    /// `edges` holds indices into `all_edges`; every endpoint must be in `nodes`.
    pub fn build(nodes: &[usize], all_edges: &[Edge], edges: &[usize]) -> Self {
        let row = |node: usize| {
            nodes
                .iter()
                .position(|&n| n == node)
                .expect("edge endpoint belongs to the subgrid")
        };
        let mut incidence = DMatrix::zeros(nodes.len(), edges.len());
        let mut weights = DVector::zeros(edges.len());
        for (k, &e) in edges.iter().enumerate() {
            let edge = &all_edges[e];
            incidence[(row(edge.from), k)] = 1.0;
            incidence[(row(edge.to), k)] = -1.0;
            weights[k] = edge.weight;
        }
        let laplacian = &incidence * DMatrix::from_diagonal(&weights) * incidence.transpose();
        Self {
            nodes: nodes.to_vec(),
            edges: edges.to_vec(),
            incidence,
            weights,
            laplacian,
        }
    }
}

/// Matrices of an ac subgrid with rows ordered machines first, then converters.
pub fn ac_graph_matrices(graph: &NetworkGraph, subgrid: &AcSubgrid) -> GraphMatrices {
    GraphMatrices::build(&subgrid.nodes(), graph.ac_edges(), &subgrid.edges)
}

/// Matrices of a dc subgrid with rows ordered converters first, then dc buses.
pub fn dc_graph_matrices(graph: &NetworkGraph, subgrid: &DcSubgrid) -> GraphMatrices {
    GraphMatrices::build(&subgrid.nodes(), graph.dc_edges(), &subgrid.edges)
}
