//! Device parameters and node roles.
//!
//! Each network node carries one parameter block matching its kind:
//!
//! | kind       | block       | parameters                                        |
//! |------------|-------------|---------------------------------------------------|
//! | ac-machine | `machine`   | inertia, damping, optional turbine                |
//! | dc-bus     | `dc-bus`    | capacitance, conductance, optional dc source      |
//! | converter  | `converter` | capacitance, conductance, p_droop, vdc_droop, optional dc source |
//!
//! A source (turbine or dc source) has a time constant and a sensitivity
//! `k_g`. Nodes are then sorted into three disjoint roles: loss (damping or
//! conductance strictly positive), generation (lossless, with a source of
//! positive sensitivity) and other.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkGraph, NetworkSpec, NodeKind, SubgridPartition};

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("node `{0}` has no device block")]
    MissingDeviceBlock(String),
    #[error("device block for unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}`: {field} must be positive, got {value}")]
    NonPositiveParameter {
        node: String,
        field: &'static str,
        value: f64,
    },
    #[error("node `{node}`: {field} must be non-negative, got {value}")]
    NegativeParameter {
        node: String,
        field: &'static str,
        value: f64,
    },
    #[error("node `{node}` is a {kind} but carries a `{block}` block")]
    KindMismatch {
        node: String,
        kind: NodeKind,
        block: &'static str,
    },
}

/// Turbine (on a machine) or dc power source (on a dc bus or converter).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    #[serde(alias = "T_g")]
    pub time_constant: f64,
    #[serde(alias = "k_g")]
    pub sensitivity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineParams {
    #[serde(alias = "M")]
    pub inertia: f64,
    #[serde(default, alias = "D")]
    pub damping: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turbine: Option<SourceParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcBusParams {
    #[serde(alias = "C")]
    pub capacitance: f64,
    #[serde(default, alias = "G")]
    pub conductance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterParams {
    #[serde(alias = "C")]
    pub capacitance: f64,
    #[serde(default, alias = "G")]
    pub conductance: f64,
    /// Active power to frequency droop gain.
    #[serde(alias = "m_p")]
    pub p_droop: f64,
    /// Dc voltage to frequency droop gain.
    #[serde(alias = "k_theta")]
    pub vdc_droop: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceParams>,
}

impl ConverterParams {
    /// Sensitivity of the attached dc source, zero without one.
    pub fn k_g(&self) -> f64 {
        self.source.map_or(0.0, |s| s.sensitivity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DeviceBlock {
    Machine(MachineParams),
    DcBus(DcBusParams),
    Converter(ConverterParams),
}

impl DeviceBlock {
    fn name(&self) -> &'static str {
        match self {
            DeviceBlock::Machine(_) => "machine",
            DeviceBlock::DcBus(_) => "dc-bus",
            DeviceBlock::Converter(_) => "converter",
        }
    }

    /// Damping of a machine or conductance of a dc bus or converter.
    pub fn loss(&self) -> f64 {
        match self {
            DeviceBlock::Machine(m) => m.damping,
            DeviceBlock::DcBus(d) => d.conductance,
            DeviceBlock::Converter(c) => c.conductance,
        }
    }

    pub fn source(&self) -> Option<&SourceParams> {
        match self {
            DeviceBlock::Machine(m) => m.turbine.as_ref(),
            DeviceBlock::DcBus(d) => d.source.as_ref(),
            DeviceBlock::Converter(c) => c.source.as_ref(),
        }
    }

    pub fn role(&self) -> Role {
        if self.loss() > 0.0 {
            Role::Loss
        } else if self.source().is_some_and(|s| s.sensitivity > 0.0) {
            Role::Generation
        } else {
            Role::Other
        }
    }
}

/// Validated device blocks keyed by node id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviceTable {
    blocks: BTreeMap<String, DeviceBlock>,
}

impl DeviceTable {
    pub fn get(&self, id: &str) -> Option<&DeviceBlock> {
        self.blocks.get(id)
    }

    pub fn machine(&self, id: &str) -> Option<&MachineParams> {
        match self.blocks.get(id) {
            Some(DeviceBlock::Machine(m)) => Some(m),
            _ => None,
        }
    }

    pub fn dc_bus(&self, id: &str) -> Option<&DcBusParams> {
        match self.blocks.get(id) {
            Some(DeviceBlock::DcBus(d)) => Some(d),
            _ => None,
        }
    }

    pub fn converter(&self, id: &str) -> Option<&ConverterParams> {
        match self.blocks.get(id) {
            Some(DeviceBlock::Converter(c)) => Some(c),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &DeviceBlock)> {
        self.blocks.iter()
    }
}

/// Checks that every node has exactly the block its kind requires and that
/// all parameters are in range.
pub fn validate_devices(spec: &NetworkSpec) -> Result<DeviceTable, DeviceError> {
    for id in spec.devices.keys() {
        if spec.node_kind(id).is_none() {
            return Err(DeviceError::UnknownNode(id.clone()));
        }
    }
    let mut blocks = BTreeMap::new();
    for node in &spec.nodes {
        let id = &node.id;
        let block = spec
            .devices
            .get(id)
            .ok_or_else(|| DeviceError::MissingDeviceBlock(id.clone()))?;
        let expected = match node.kind {
            NodeKind::AcMachine => matches!(block, DeviceBlock::Machine(_)),
            NodeKind::DcBus => matches!(block, DeviceBlock::DcBus(_)),
            NodeKind::Converter => matches!(block, DeviceBlock::Converter(_)),
            NodeKind::AcBus => false,
        };
        if !expected {
            return Err(DeviceError::KindMismatch {
                node: id.clone(),
                kind: node.kind,
                block: block.name(),
            });
        }
        check_block(id, block)?;
        blocks.insert(id.clone(), *block);
    }
    Ok(DeviceTable { blocks })
}

fn positive(node: &str, field: &'static str, value: f64) -> Result<(), DeviceError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(DeviceError::NonPositiveParameter {
            node: node.to_string(),
            field,
            value,
        })
    }
}

fn non_negative(node: &str, field: &'static str, value: f64) -> Result<(), DeviceError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(DeviceError::NegativeParameter {
            node: node.to_string(),
            field,
            value,
        })
    }
}

fn check_source(node: &str, source: &Option<SourceParams>) -> Result<(), DeviceError> {
    if let Some(s) = source {
        positive(node, "time_constant", s.time_constant)?;
        non_negative(node, "sensitivity", s.sensitivity)?;
    }
    Ok(())
}

fn check_block(node: &str, block: &DeviceBlock) -> Result<(), DeviceError> {
    match block {
        DeviceBlock::Machine(m) => {
            positive(node, "inertia", m.inertia)?;
            non_negative(node, "damping", m.damping)?;
            check_source(node, &m.turbine)
        }
        DeviceBlock::DcBus(d) => {
            positive(node, "capacitance", d.capacitance)?;
            non_negative(node, "conductance", d.conductance)?;
            check_source(node, &d.source)
        }
        DeviceBlock::Converter(c) => {
            positive(node, "capacitance", c.capacitance)?;
            non_negative(node, "conductance", c.conductance)?;
            positive(node, "p_droop", c.p_droop)?;
            positive(node, "vdc_droop", c.vdc_droop)?;
            check_source(node, &c.source)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Loss,
    Generation,
    Other,
}

/// Node indices of one device class split by role, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RoleSplit {
    pub loss: Vec<usize>,
    pub generation: Vec<usize>,
    pub other: Vec<usize>,
}

impl RoleSplit {
    fn push(&mut self, node: usize, role: Role) {
        match role {
            Role::Loss => self.loss.push(node),
            Role::Generation => self.generation.push(node),
            Role::Other => self.other.push(node),
        }
    }

    pub fn len(&self) -> usize {
        self.loss.len() + self.generation.len() + self.other.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loss and generation nodes, ascending.
    pub fn stabilizing(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.loss.iter().chain(&self.generation).copied().collect();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AcRoles {
    pub machines: RoleSplit,
    pub converters: RoleSplit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DcRoles {
    pub buses: RoleSplit,
    pub converters: RoleSplit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeRoleSets {
    pub ac: Vec<AcRoles>,
    pub dc: Vec<DcRoles>,
    roles: Vec<Role>,
}

impl NodeRoleSets {
    pub fn role(&self, node: usize) -> Role {
        self.roles[node]
    }
}

pub fn classify_nodes(graph: &NetworkGraph, partition: &SubgridPartition, devices: &DeviceTable) -> NodeRoleSets {
    let roles: Vec<Role> = graph
        .nodes()
        .iter()
        .map(|n| devices.get(&n.id).map_or(Role::Other, DeviceBlock::role))
        .collect();
    let split = |nodes: &[usize]| {
        let mut s = RoleSplit::default();
        for &n in nodes {
            s.push(n, roles[n]);
        }
        s
    };
    let ac = partition
        .ac
        .iter()
        .map(|sg| AcRoles {
            machines: split(&sg.machines),
            converters: split(&sg.converters),
        })
        .collect();
    let dc = partition
        .dc
        .iter()
        .map(|sg| DcRoles {
            buses: split(&sg.buses),
            converters: split(&sg.converters),
        })
        .collect();
    NodeRoleSets { ac, dc, roles }
}
