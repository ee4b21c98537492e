use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::devices::AcRoles;
use crate::linalg;
use crate::network::{ac_graph_matrices, AcSubgrid, NetworkGraph};

/// Below `tol_rank` but above `tol_rank * INDETERMINATE_BAND` a rank test is
/// reported as numerically indeterminate rather than failed.
pub const INDETERMINATE_BAND: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankOutcome {
    Full,
    Deficient,
    Indeterminate,
    /// The subgrid has no machines; nothing to check.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTest {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub singular_values: Vec<f64>,
    /// Smallest relevant over largest singular value.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Result {
    /// Converter rows, machine columns of the subgrid Laplacian.
    pub converter_machine: RankTest,
    /// Rows: damped machines, machines with responsive sources, all
    /// converters. Columns: remaining machines and remaining converters.
    pub stabilizing_other: RankTest,
    pub outcome: RankOutcome,
}

impl Assumption2Result {
    pub fn pass(&self) -> bool {
        matches!(self.outcome, RankOutcome::Full | RankOutcome::NotApplicable)
    }
}

fn rank_test(graph: &NetworkGraph, lap: &DMatrix<f64>, order: &[usize], rows: &[usize], cols: &[usize]) -> RankTest {
    let pos = |n: &usize| order.iter().position(|m| m == n).expect("subgrid node");
    let r: Vec<usize> = rows.iter().map(pos).collect();
    let c: Vec<usize> = cols.iter().map(pos).collect();
    let sub = lap.select_rows(&r).select_columns(&c);
    let ids = |v: &[usize]| v.iter().map(|&n| graph.id(n).to_string()).collect();
    RankTest {
        rows: ids(rows),
        cols: ids(cols),
        singular_values: linalg::singular_values(&sub),
        ratio: linalg::column_rank_ratio(&sub),
    }
}

/// Full-column-rank test of the two Laplacian blocks; passing either suffices.
pub fn assumption2_numeric(graph: &NetworkGraph, subgrid: &AcSubgrid, roles: &AcRoles, tol_rank: f64) -> Assumption2Result {
    let lap = ac_graph_matrices(graph, subgrid).laplacian;
    let order = subgrid.nodes();

    let converter_machine = rank_test(graph, &lap, &order, &subgrid.converters, &subgrid.machines);
    let rows: Vec<usize> = roles
        .machines
        .loss
        .iter()
        .chain(&roles.machines.generation)
        .chain(&subgrid.converters)
        .copied()
        .collect();
    let cols: Vec<usize> = roles.machines.other.iter().chain(&roles.converters.other).copied().collect();
    let stabilizing_other = rank_test(graph, &lap, &order, &rows, &cols);

    let outcome = if subgrid.machines.is_empty() {
        RankOutcome::NotApplicable
    } else {
        let best = converter_machine.ratio.max(stabilizing_other.ratio);
        if best > tol_rank {
            RankOutcome::Full
        } else if best > tol_rank * INDETERMINATE_BAND {
            RankOutcome::Indeterminate
        } else {
            RankOutcome::Deficient
        }
    };
    Assumption2Result {
        converter_machine,
        stabilizing_other,
        outcome,
    }
}
