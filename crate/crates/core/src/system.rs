//! Assembly of the linear model `T dx/dt = A x + E_d u`.
//!
//! The state is `x = (η, ω, v, P, P̄)`:
//!
//! - `η`: angle difference across every ac edge, `η = B_acᵀ θ`;
//! - `ω`: machine frequency deviations;
//! - `v`: dc voltage deviations, converters first, then dc buses;
//! - `P`: output of sources with positive sensitivity;
//! - `P̄`: output of sources with zero sensitivity.
//!
//! The angle vector `θ` orders machines before converters. Sources are
//! ordered by their host node. The disturbance input `u` stacks the ac-side
//! loads in `θ` order and the dc-side loads in `v` order.
//!
//! Block structure of `A` (selection matrices `I_ac`, `I_cac` pick machines
//! and converters out of `θ`; `I_cdc` picks converters out of `v`):
//!
//! | row | η                     | ω          | v                  | P          | P̄         |
//! |-----|-----------------------|------------|--------------------|------------|------------|
//! | η   | -(I_cac B)ᵀ M_p I_cac B W | (I_ac B)ᵀ | (I_cac B)ᵀ K_θ I_cdc | 0        | 0          |
//! | ω   | -I_ac B W             | -D         | 0                  | I_g,ac     | Ī_g,ac     |
//! | v   | -I_cdcᵀ I_cac B W     | 0          | -(G + L_dc)        | I_g,dc     | Ī_g,dc     |
//! | P   | 0                     | -K_g I_g,acᵀ | -K_g I_g,dcᵀ     | -I         | 0          |
//! | P̄   | 0                     | 0          | 0                  | 0          | -I         |

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::devices::{DeviceBlock, DeviceTable};
use crate::linalg::{self, put, selection};
use crate::network::{GraphMatrices, NetworkGraph, NodeKind, SubgridPartition};

/// Index ranges of the state blocks and the ids behind every entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateLayout {
    pub eta: Range<usize>,
    pub omega: Range<usize>,
    pub v: Range<usize>,
    pub p: Range<usize>,
    pub p_bar: Range<usize>,
    pub edge_ids: Vec<String>,
    pub machine_ids: Vec<String>,
    pub v_ids: Vec<String>,
    pub source_ids: Vec<String>,
    pub idle_source_ids: Vec<String>,
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        self.p_bar.end
    }

    /// One label per state entry, such as `eta[1-2]` or `v[10]`.
    pub fn labels(&self) -> Vec<String> {
        let tag = |prefix: &str, ids: &[String]| ids.iter().map(|id| format!("{prefix}[{id}]")).collect::<Vec<_>>();
        [
            tag("eta", &self.edge_ids),
            tag("omega", &self.machine_ids),
            tag("v", &self.v_ids),
            tag("P", &self.source_ids),
            tag("Pbar", &self.idle_source_ids),
        ]
        .concat()
    }
}

/// Which side of a converter a load acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    Ac,
    Dc,
}

/// Constant load deviations: `ac` in `θ` order, `dc` in `v` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    pub ac: DVector<f64>,
    pub dc: DVector<f64>,
}

impl Disturbance {
    pub fn zeros(model: &SystemModel) -> Self {
        Self {
            ac: DVector::zeros(model.theta_nodes.len()),
            dc: DVector::zeros(model.v_nodes.len()),
        }
    }

    /// Stacked input vector `u`.
    pub fn input(&self) -> DVector<f64> {
        linalg::concat(&[&self.ac, &self.dc])
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            ac: &self.ac * alpha,
            dc: &self.dc * alpha,
        }
    }
}

/// The assembled model together with every matrix it is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub layout: StateLayout,
    /// Graph node indices in `θ` order (machines, then converters).
    pub theta_nodes: Vec<usize>,
    /// Graph node indices in `v` order (converters, then dc buses).
    pub v_nodes: Vec<usize>,
    pub theta_ids: Vec<String>,
    pub n_machines: usize,
    pub n_converters: usize,
    /// Ac subgrid of every `θ` entry.
    pub theta_subgrid: Vec<usize>,
    /// Dc subgrid of every `v` entry.
    pub v_subgrid: Vec<usize>,
    pub n_ac_subgrids: usize,
    pub n_dc_subgrids: usize,

    pub b_ac: DMatrix<f64>,
    pub w_ac: DVector<f64>,
    pub l_dc: DMatrix<f64>,

    pub i_ac: DMatrix<f64>,
    pub i_cac: DMatrix<f64>,
    pub i_cdc: DMatrix<f64>,
    pub i_dc: DMatrix<f64>,
    pub i_g_ac: DMatrix<f64>,
    pub i_g_dc: DMatrix<f64>,
    pub ibar_g_ac: DMatrix<f64>,
    pub ibar_g_dc: DMatrix<f64>,

    pub inertia: DVector<f64>,
    pub damping: DVector<f64>,
    pub capacitance: DVector<f64>,
    pub conductance: DVector<f64>,
    pub m_p: DVector<f64>,
    pub k_theta: DVector<f64>,
    /// Per `v` entry: the common converter gain of its dc subgrid, or the
    /// largest one when the gains differ, or 1 for a dc subgrid without
    /// converters.
    pub k_theta_tilde: DVector<f64>,
    pub k_g: DVector<f64>,
    pub t_g: DVector<f64>,
    pub t_g_idle: DVector<f64>,
    /// Source sensitivity attached to each machine (zero without one).
    pub machine_k_g: DVector<f64>,
    /// Source sensitivity attached to each `v` entry (zero without one).
    pub v_k_g: DVector<f64>,
    /// Per dc subgrid: whether all its converters share one `vdc_droop`.
    pub dc_gains_consistent: Vec<bool>,

    /// Diagonal of `T`.
    pub t: DVector<f64>,
    pub a: DMatrix<f64>,
    pub e_d: DMatrix<f64>,
}

impl SystemModel {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.theta_nodes.len() + self.v_nodes.len()
    }

    /// `T⁻¹ A`.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let mut m = self.a.clone();
        for (r, &t) in self.t.iter().enumerate() {
            m.row_mut(r).unscale_mut(t);
        }
        m
    }

    /// `T⁻¹ E_d`.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let mut m = self.e_d.clone();
        for (r, &t) in self.t.iter().enumerate() {
            m.row_mut(r).unscale_mut(t);
        }
        m
    }

    /// `dx/dt` for state `x` under disturbance `u`.
    pub fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut dx = &self.a * x + &self.e_d * u;
        dx.component_div_assign(&self.t);
        dx
    }

    pub fn condition1_holds(&self) -> bool {
        self.dc_gains_consistent.iter().all(|&c| c)
    }

    pub fn theta_index(&self, id: &str) -> Option<usize> {
        self.theta_ids.iter().position(|x| x == id)
    }

    pub fn v_index(&self, id: &str) -> Option<usize> {
        self.layout.v_ids.iter().position(|x| x == id)
    }

    /// Angle differences `η = B_acᵀ θ`.
    pub fn eta_from_theta(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.b_ac.transpose() * theta
    }
}

/// Builds the model. Inputs must come from the same validated spec.
pub fn assemble(graph: &NetworkGraph, partition: &SubgridPartition, devices: &DeviceTable) -> SystemModel {
    let machines = graph.nodes_of_kind(NodeKind::AcMachine);
    let converters = graph.nodes_of_kind(NodeKind::Converter);
    let buses = graph.nodes_of_kind(NodeKind::DcBus);
    let theta_nodes: Vec<usize> = machines.iter().chain(&converters).copied().collect();
    let v_nodes: Vec<usize> = converters.iter().chain(&buses).copied().collect();
    let (nm, nc, nv, nt) = (machines.len(), converters.len(), v_nodes.len(), theta_nodes.len());
    let ne = graph.ac_edges().len();

    let ids = |nodes: &[usize]| nodes.iter().map(|&n| graph.id(n).to_string()).collect::<Vec<_>>();
    let block = |n: usize| devices.get(graph.id(n)).expect("validated device table");

    let ac = GraphMatrices::build(&theta_nodes, graph.ac_edges(), &(0..ne).collect::<Vec<_>>());
    let dc = GraphMatrices::build(&v_nodes, graph.dc_edges(), &(0..graph.dc_edges().len()).collect::<Vec<_>>());
    let b_ac = ac.incidence;
    let w_ac = ac.weights;
    let l_dc = dc.laplacian;

    let i_ac = selection(&(0..nm).collect::<Vec<_>>(), nt);
    let i_cac = selection(&(nm..nt).collect::<Vec<_>>(), nt);
    let i_cdc = selection(&(0..nc).collect::<Vec<_>>(), nv);
    let i_dc = selection(&(nc..nv).collect::<Vec<_>>(), nv);

    let mut inertia = DVector::zeros(nm);
    let mut damping = DVector::zeros(nm);
    let mut machine_k_g = DVector::zeros(nm);
    for (k, &n) in machines.iter().enumerate() {
        let DeviceBlock::Machine(m) = block(n) else { unreachable!("machine node") };
        inertia[k] = m.inertia;
        damping[k] = m.damping;
        machine_k_g[k] = m.turbine.map_or(0.0, |s| s.sensitivity);
    }
    let mut capacitance = DVector::zeros(nv);
    let mut conductance = DVector::zeros(nv);
    let mut v_k_g = DVector::zeros(nv);
    let mut m_p = DVector::zeros(nc);
    let mut k_theta = DVector::zeros(nc);
    for (k, &n) in v_nodes.iter().enumerate() {
        match block(n) {
            DeviceBlock::Converter(c) => {
                capacitance[k] = c.capacitance;
                conductance[k] = c.conductance;
                v_k_g[k] = c.k_g();
                m_p[k] = c.p_droop;
                k_theta[k] = c.vdc_droop;
            }
            DeviceBlock::DcBus(d) => {
                capacitance[k] = d.capacitance;
                conductance[k] = d.conductance;
                v_k_g[k] = d.source.map_or(0.0, |s| s.sensitivity);
            }
            DeviceBlock::Machine(_) => unreachable!("dc node"),
        }
    }

    // Sources in host-node order, split by sensitivity.
    let mut active: Vec<(usize, f64, f64)> = Vec::new();
    let mut idle: Vec<(usize, f64)> = Vec::new();
    for n in 0..graph.len() {
        if let Some(s) = block(n).source() {
            if s.sensitivity > 0.0 {
                active.push((n, s.sensitivity, s.time_constant));
            } else {
                idle.push((n, s.time_constant));
            }
        }
    }
    let (ng, ngi) = (active.len(), idle.len());
    let host_matrix = |hosts: &[usize], rows: &[usize]| {
        let mut m = DMatrix::zeros(rows.len(), hosts.len());
        for (j, h) in hosts.iter().enumerate() {
            if let Some(r) = rows.iter().position(|n| n == h) {
                m[(r, j)] = 1.0;
            }
        }
        m
    };
    let active_hosts: Vec<usize> = active.iter().map(|s| s.0).collect();
    let idle_hosts: Vec<usize> = idle.iter().map(|s| s.0).collect();
    let i_g_ac = host_matrix(&active_hosts, &machines);
    let i_g_dc = host_matrix(&active_hosts, &v_nodes);
    let ibar_g_ac = host_matrix(&idle_hosts, &machines);
    let ibar_g_dc = host_matrix(&idle_hosts, &v_nodes);
    let k_g = DVector::from_iterator(ng, active.iter().map(|s| s.1));
    let t_g = DVector::from_iterator(ng, active.iter().map(|s| s.2));
    let t_g_idle = DVector::from_iterator(ngi, idle.iter().map(|s| s.1));

    let theta_subgrid: Vec<usize> = theta_nodes
        .iter()
        .map(|&n| partition.ac_subgrid_of(n).expect("ac node in an ac subgrid"))
        .collect();
    let v_subgrid: Vec<usize> = v_nodes
        .iter()
        .map(|&n| partition.dc_subgrid_of(n).expect("dc node in a dc subgrid"))
        .collect();

    let mut dc_gains_consistent = vec![true; partition.dc.len()];
    let mut subgrid_gain = vec![None::<f64>; partition.dc.len()];
    for k in 0..nc {
        let j = v_subgrid[k];
        match subgrid_gain[j] {
            None => subgrid_gain[j] = Some(k_theta[k]),
            Some(g) => {
                if g != k_theta[k] {
                    dc_gains_consistent[j] = false;
                }
                subgrid_gain[j] = Some(g.max(k_theta[k]));
            }
        }
    }
    let k_theta_tilde = DVector::from_iterator(nv, v_subgrid.iter().map(|&j| subgrid_gain[j].unwrap_or(1.0)));

    // A
    let dim = ne + nm + nv + ng + ngi;
    let (r_eta, r_om, r_v, r_p, r_pb) = (0, ne, ne + nm, ne + nm + nv, ne + nm + nv + ng);
    let w = DMatrix::from_diagonal(&w_ac);
    let cb = &i_cac * &b_ac;
    let mb = &i_ac * &b_ac;
    let mp = DMatrix::from_diagonal(&m_p);
    let kt = DMatrix::from_diagonal(&k_theta);
    let kg = DMatrix::from_diagonal(&k_g);
    let g_plus_l = DMatrix::from_diagonal(&conductance) + &l_dc;

    let mut a = DMatrix::zeros(dim, dim);
    put(&mut a, r_eta, r_eta, &(-(cb.transpose() * &mp * &cb * &w)));
    put(&mut a, r_eta, r_om, &mb.transpose());
    put(&mut a, r_eta, r_v, &(cb.transpose() * &kt * &i_cdc));
    put(&mut a, r_om, r_eta, &(-(&mb * &w)));
    put(&mut a, r_om, r_om, &(-DMatrix::from_diagonal(&damping)));
    put(&mut a, r_om, r_p, &i_g_ac);
    put(&mut a, r_om, r_pb, &ibar_g_ac);
    put(&mut a, r_v, r_eta, &(-(i_cdc.transpose() * &cb * &w)));
    put(&mut a, r_v, r_v, &(-g_plus_l));
    put(&mut a, r_v, r_p, &i_g_dc);
    put(&mut a, r_v, r_pb, &ibar_g_dc);
    put(&mut a, r_p, r_om, &(-(&kg * i_g_ac.transpose())));
    put(&mut a, r_p, r_v, &(-(&kg * i_g_dc.transpose())));
    put(&mut a, r_p, r_p, &(-DMatrix::identity(ng, ng)));
    put(&mut a, r_pb, r_pb, &(-DMatrix::identity(ngi, ngi)));

    // E_d
    let mut e_d = DMatrix::zeros(dim, nt + nv);
    put(&mut e_d, r_eta, 0, &(-(cb.transpose() * &mp * &i_cac)));
    put(&mut e_d, r_om, 0, &(-i_ac.clone()));
    put(&mut e_d, r_v, 0, &(-(i_cdc.transpose() * &i_cac)));
    put(&mut e_d, r_v, nt, &(-DMatrix::identity(nv, nv)));

    let t = linalg::concat(&[
        &DVector::from_element(ne, 1.0),
        &inertia,
        &capacitance,
        &t_g,
        &t_g_idle,
    ]);

    let layout = StateLayout {
        eta: r_eta..r_om,
        omega: r_om..r_v,
        v: r_v..r_p,
        p: r_p..r_pb,
        p_bar: r_pb..dim,
        edge_ids: graph.ac_edges().iter().map(|e| e.id.clone()).collect(),
        machine_ids: ids(&machines),
        v_ids: ids(&v_nodes),
        source_ids: ids(&active_hosts),
        idle_source_ids: ids(&idle_hosts),
    };

    SystemModel {
        layout,
        theta_ids: ids(&theta_nodes),
        theta_nodes,
        v_nodes,
        n_machines: nm,
        n_converters: nc,
        theta_subgrid,
        v_subgrid,
        n_ac_subgrids: partition.ac.len(),
        n_dc_subgrids: partition.dc.len(),
        b_ac,
        w_ac,
        l_dc,
        i_ac,
        i_cac,
        i_cdc,
        i_dc,
        i_g_ac,
        i_g_dc,
        ibar_g_ac,
        ibar_g_dc,
        inertia,
        damping,
        capacitance,
        conductance,
        m_p,
        k_theta,
        k_theta_tilde,
        k_g,
        t_g,
        t_g_idle,
        machine_k_g,
        v_k_g,
        dc_gains_consistent,
        t,
        a,
        e_d,
    }
}

/// Orthonormal basis of the subspace reachable by the dynamics: the cut
/// space `im(B_acᵀ)` in the `η` block and every other coordinate in full.
///
/// On a cyclic ac graph `η = B_acᵀ θ` cannot leave the cut space, but `A`
/// still has spurious zero modes outside it; spectra are therefore taken on
/// `Qᵀ T⁻¹ A Q`.
pub fn reachable_subspace_basis(model: &SystemModel) -> DMatrix<f64> {
    let ne = model.layout.eta.len();
    let rest = model.dim() - ne;
    let eta_basis = if ne == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let bt = model.b_ac.transpose();
        let q = linalg::orthonormal_range(&bt, 1e-10);
        if q.ncols() == ne {
            DMatrix::identity(ne, ne)
        } else {
            q
        }
    };
    linalg::block_diag(&[&eta_basis, &DMatrix::identity(rest, rest)])
}
