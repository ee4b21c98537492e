use serde::{Deserialize, Serialize};

use crate::devices::{DeviceTable, NodeRoleSets};
use crate::network::{NetworkGraph, SubgridPartition};

/// Gain consistency of one dc subgrid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition1Result {
    pub dc_subgrid: usize,
    pub pass: bool,
    /// `vdc_droop` of every converter in the subgrid, by node id.
    pub gains: Vec<(String, f64)>,
}

/// Passes for a dc subgrid iff all its converters store exactly the same
/// `vdc_droop`. Gains are design values, so no tolerance is applied.
pub fn check_condition1(graph: &NetworkGraph, partition: &SubgridPartition, devices: &DeviceTable) -> Vec<Condition1Result> {
    partition
        .dc
        .iter()
        .map(|sg| {
            let gains: Vec<(String, f64)> = sg
                .converters
                .iter()
                .map(|&c| {
                    let id = graph.id(c);
                    let k = devices.converter(id).expect("converter block").vdc_droop;
                    (id.to_string(), k)
                })
                .collect();
            let pass = gains.windows(2).all(|w| w[0].1 == w[1].1);
            Condition1Result {
                dc_subgrid: sg.index,
                pass,
                gains,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption1Result {
    pub pass: bool,
    /// First node, in node order, with losses or a responsive source.
    pub witness: Option<String>,
}

/// Passes iff some node in any subgrid has losses or a responsive source.
pub fn check_assumption1(graph: &NetworkGraph, roles: &NodeRoleSets) -> Assumption1Result {
    let mut candidates: Vec<usize> = Vec::new();
    for ac in &roles.ac {
        candidates.extend(ac.machines.stabilizing());
        candidates.extend(ac.converters.stabilizing());
    }
    for dc in &roles.dc {
        candidates.extend(dc.buses.stabilizing());
        candidates.extend(dc.converters.stabilizing());
    }
    let witness = candidates.into_iter().min().map(|n| graph.id(n).to_string());
    Assumption1Result {
        pass: witness.is_some(),
        witness,
    }
}
