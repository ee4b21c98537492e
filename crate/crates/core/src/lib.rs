//! Modeling and stability verification for hybrid ac/dc power systems whose
//! converters run power-balancing dual-port grid-forming control.
//!
//! The crate is organised along the analysis pipeline:
//!
//! - [`network`]: parse and validate the topology, split it into ac and dc
//!   subgrids, build incidence and Laplacian matrices, Kron reduction.
//! - [`devices`]: machine, turbine, dc bus, dc source and converter
//!   parameters, and the loss / generation / other role of every node.
//! - [`system`]: the linear model `T dx/dt = A x + E_d P_d` in the
//!   coordinates (η, ω, v, P, P̄).
//! - [`steady_state`]: steady-state maps and the equilibrium solve.
//! - [`stability`]: topological and numeric stability checks, the LaSalle
//!   function and an eigenvalue oracle.
//! - [`sim`]: deterministic fixed-step RK4 simulation.
//!
//! [`HybridGrid`] wires the stages together for the common case of going
//! from a [`NetworkSpec`] to an assembled [`SystemModel`].

pub mod bundle;
pub mod devices;
pub mod linalg;
pub mod network;
pub mod sim;
pub mod stability;
pub mod steady_state;
pub mod system;

use thiserror::Error;

pub use devices::{DeviceError, DeviceTable, NodeRoleSets, Role};
pub use network::{NetworkError, NetworkGraph, NetworkSpec, SubgridPartition};
pub use sim::{DisturbanceSchedule, SimError, SimOptions, Trajectory};
pub use stability::{StabilityOptions, StabilityReport, Verdict};
pub use steady_state::{Equilibrium, SteadyStateError};
pub use system::{Disturbance, StateLayout, SystemModel};

/// Any error raised while turning a network description into results.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    SteadyState(#[from] SteadyStateError),
    #[error(transparent)]
    Stability(#[from] stability::StabilityError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A validated network together with its partition, device table, node roles
/// and assembled linear model.
#[derive(Debug, Clone)]
pub struct HybridGrid {
    pub graph: NetworkGraph,
    pub partition: SubgridPartition,
    pub devices: DeviceTable,
    pub roles: NodeRoleSets,
    pub model: SystemModel,
}

impl HybridGrid {
    /// Runs every construction stage. Passive ac buses are Kron-reduced away
    /// first, so a spec may describe the unreduced transmission network.
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, Error> {
        let reduced;
        let spec = if spec.has_passive_buses() {
            reduced = network::reduce_passive_buses(spec)?;
            &reduced
        } else {
            spec
        };
        let graph = network::build_network(spec)?;
        let devices = devices::validate_devices(spec)?;
        let partition = network::partition_subgrids(&graph);
        let roles = devices::classify_nodes(&graph, &partition, &devices);
        let model = system::assemble(&graph, &partition, &devices);
        Ok(Self {
            graph,
            partition,
            devices,
            roles,
            model,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let spec = NetworkSpec::from_json(text)?;
        Self::from_spec(&spec)
    }

    pub fn verify(&self, options: &StabilityOptions) -> StabilityReport {
        stability::verify_stability(self, options)
    }
}
