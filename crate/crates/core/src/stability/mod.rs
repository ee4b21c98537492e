//! Stability checks for the assembled hybrid grid.
//!
//! The sufficient conditions are checked in layers: gain consistency on each
//! dc subgrid, existence of some loss or responsive source, and a rank
//! condition on each ac subgrid. The rank condition is certified
//! topologically where possible (node removal or the cycle rule) and
//! otherwise numerically. An eigenvalue oracle on the reachable subspace
//! gives an independent numeric witness.

mod conditions;
mod eigen;
mod lasalle;
mod rank;
mod topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conditions::{check_assumption1, check_condition1, Assumption1Result, Condition1Result};
pub use eigen::{eigen_oracle, EigenReport, EigenVerdict};
pub use lasalle::LaSalleFunction;
pub use rank::{assumption2_numeric, Assumption2Result, RankOutcome, RankTest, INDETERMINATE_BAND};
pub use topology::{
    algorithm1, biconnected_blocks, corollary1, def1_partition, reduced_graph, Algorithm1Result, Corollary1Result,
    CorollaryNode, Def1Partition, Group, ReducedGraph, Removal,
};

use crate::network::NetworkGraph;
use crate::HybridGrid;

pub const TOL_RANK: f64 = 1e-8;
pub const TOL_EIG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub tol_rank: f64,
    pub tol_eig: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            tol_rank: TOL_RANK,
            tol_eig: TOL_EIG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StabilityError {
    #[error("LaSalle certificate invalid: converters in some dc subgrid use different vdc_droop gains")]
    CertificateInvalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

/// Which check certified the rank condition of an ac subgrid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    NoMachines,
    NodeRemoval,
    CycleRule,
    NumericRank,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionIds {
    pub converter_dominated: bool,
    pub d: Vec<String>,
    pub c: Vec<String>,
    pub f: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalIds {
    pub single_edge_node: String,
    pub removed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRemovalReport {
    pub emptied: bool,
    pub removals: Vec<RemovalIds>,
    pub remaining: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRuleNode {
    pub node: String,
    pub case1: bool,
    pub case2: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRuleReport {
    pub pass: bool,
    /// Every `C` node satisfies the direct single-edge case.
    pub pass_case1: bool,
    pub nodes: Vec<CycleRuleNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgridReport {
    pub subgrid: usize,
    pub nodes: Vec<String>,
    pub partition: PartitionIds,
    /// Edge ids kept in the reduced graph.
    pub reduced_edges: Vec<String>,
    pub node_removal: NodeRemovalReport,
    pub cycle_rule: CycleRuleReport,
    pub rank: Assumption2Result,
    pub certified_by: Option<Certificate>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub condition1: Vec<Condition1Result>,
    pub condition1_pass: bool,
    pub assumption1: Assumption1Result,
    pub subgrids: Vec<SubgridReport>,
    pub lasalle_certificate_valid: bool,
    pub eigen: EigenReport,
    /// Negated spectral abscissa; positive when the reachable spectrum is
    /// strictly stable, `None` when it is empty.
    pub spectral_margin: Option<f64>,
    pub options: StabilityOptions,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

fn ids(graph: &NetworkGraph, nodes: &[usize]) -> Vec<String> {
    nodes.iter().map(|&n| graph.id(n).to_string()).collect()
}

/// Runs every check and combines them into one verdict.
///
/// A subgrid is certified by the first of: no machines, the cycle rule, node
/// removal emptying `C`, or full numeric rank. The overall verdict
/// passes only if the dc gains are consistent, some stabilizing node exists
/// and every ac subgrid is certified.
pub fn verify_stability(grid: &HybridGrid, options: &StabilityOptions) -> StabilityReport {
    let graph = &grid.graph;
    let condition1 = check_condition1(graph, &grid.partition, &grid.devices);
    let condition1_pass = condition1.iter().all(|c| c.pass);
    let assumption1 = check_assumption1(graph, &grid.roles);

    let subgrids: Vec<SubgridReport> = grid
        .partition
        .ac
        .iter()
        .zip(&grid.roles.ac)
        .map(|(sg, roles)| {
            let def1 = def1_partition(sg, roles);
            let reduced = reduced_graph(graph, sg, &def1);
            let removal = algorithm1(graph, &reduced, &def1);
            let cycle = corollary1(graph, &reduced, &def1);
            let rank = assumption2_numeric(graph, sg, roles, options.tol_rank);

            let certified_by = if sg.machines.is_empty() {
                Some(Certificate::NoMachines)
            } else if cycle.pass {
                Some(Certificate::CycleRule)
            } else if removal.emptied {
                Some(Certificate::NodeRemoval)
            } else if rank.outcome == RankOutcome::Full {
                Some(Certificate::NumericRank)
            } else {
                None
            };
            let verdict = match (certified_by, rank.outcome) {
                (Some(_), _) => Verdict::Pass,
                (None, RankOutcome::Indeterminate) => Verdict::Indeterminate,
                (None, _) => Verdict::Fail,
            };
            SubgridReport {
                subgrid: sg.index,
                nodes: ids(graph, &sg.nodes()),
                partition: PartitionIds {
                    converter_dominated: def1.converter_dominated,
                    d: ids(graph, &def1.d),
                    c: ids(graph, &def1.c),
                    f: ids(graph, &def1.f),
                },
                reduced_edges: reduced.edges.iter().map(|&e| graph.ac_edges()[e].id.clone()).collect(),
                node_removal: NodeRemovalReport {
                    emptied: removal.emptied,
                    removals: removal
                        .removals
                        .iter()
                        .map(|r| RemovalIds {
                            single_edge_node: graph.id(r.single_edge_node).to_string(),
                            removed: graph.id(r.removed).to_string(),
                        })
                        .collect(),
                    remaining: ids(graph, &removal.remaining),
                },
                cycle_rule: CycleRuleReport {
                    pass: cycle.pass,
                    pass_case1: cycle.nodes.iter().all(|n| n.case1),
                    nodes: cycle
                        .nodes
                        .iter()
                        .map(|n| CycleRuleNode {
                            node: graph.id(n.node).to_string(),
                            case1: n.case1,
                            case2: n.case2,
                        })
                        .collect(),
                },
                rank,
                certified_by,
                verdict,
            }
        })
        .collect();

    let lasalle_certificate_valid = LaSalleFunction::new(&grid.model).is_ok();
    let eigen = eigen_oracle(&grid.model, options.tol_eig);
    let spectral_margin = eigen.max_real.map(|m| -m);

    let mut notes = Vec::new();
    if !condition1_pass {
        notes.push("dc subgrid with inconsistent vdc_droop gains; the LaSalle certificate does not apply".to_string());
    }
    if !assumption1.pass {
        notes.push("no node has losses or a responsive source".to_string());
    }
    for s in &subgrids {
        match s.verdict {
            Verdict::Fail => notes.push(format!(
                "ac subgrid {}: rank condition not certified (smallest singular value ratio {:.3e})",
                s.subgrid,
                s.rank.converter_machine.ratio.max(s.rank.stabilizing_other.ratio)
            )),
            Verdict::Indeterminate => notes.push(format!(
                "ac subgrid {}: rank condition numerically indeterminate near tolerance {:.1e}",
                s.subgrid, options.tol_rank
            )),
            Verdict::Pass => {}
        }
    }
    if subgrids.iter().any(|s| s.certified_by == Some(Certificate::CycleRule)) {
        notes.push("cycle rule evaluated on cycles of the reduced graph only".to_string());
    }
    match eigen.verdict {
        EigenVerdict::Marginal => notes.push(format!(
            "eigen oracle: marginal modes, max real part {:.3e}",
            eigen.max_real.unwrap_or(0.0)
        )),
        EigenVerdict::Unstable => notes.push(format!(
            "eigen oracle: unstable modes, max real part {:.3e}",
            eigen.max_real.unwrap_or(0.0)
        )),
        EigenVerdict::Stable => {}
    }

    let verdict = if !condition1_pass || !assumption1.pass || subgrids.iter().any(|s| s.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if subgrids.iter().any(|s| s.verdict == Verdict::Indeterminate) {
        Verdict::Indeterminate
    } else {
        Verdict::Pass
    };

    StabilityReport {
        condition1,
        condition1_pass,
        assumption1,
        subgrids,
        lasalle_certificate_valid,
        eigen,
        spectral_margin,
        options: *options,
        verdict,
        notes,
    }
}
