//! Steady-state response to constant load deviations.
//!
//! In a synchronous steady state every angle of ac subgrid `i` rotates at a
//! common frequency deviation `ω_s^i`, while `ω`, `v`, `P` and `P̄` are
//! constant. [`solve_equilibrium`] finds that state from an augmented linear
//! system with one extra unknown `ω_s^i` and one angle reference per ac
//! subgrid.
//!
//! The per-subgrid balance relations checked by [`frequency_balance`] and
//! [`voltage_balance`] follow from summing the node equations:
//!
//! ```text
//! ω_s^i · Σ γ_ac,l  = -( Σ_conv δ_ac,l P_dc,l + Σ P_d,ac )
//! Σ γ_dc,l v_l      =    Σ_conv ω_s^{j_l} / m_p,l − Σ P_d,dc
//! ```
//!
//! where `P_dc = L_dc v + P_d,dc` is the dc network injection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::ConverterParams;
use crate::linalg::{self, put};
use crate::system::{Disturbance, SystemModel};

/// Below this singular-value ratio the equilibrium system counts as singular.
pub const SINGULAR_RATIO: f64 = 1e-14;
/// Below this singular-value ratio the solution is flagged ill-conditioned.
pub const ILL_CONDITIONED_RATIO: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SteadyStateError {
    #[error("equilibrium system is singular (singular-value ratio {0:.3e}); no device provides damping or a responsive source")]
    SingularEquilibrium(f64),
    #[error("droop slope needs a source with positive sensitivity")]
    RequiresPositiveKg,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("disturbance has dimension ({found_ac}, {found_dc}), model expects ({ac}, {dc})")]
    DimensionMismatch {
        ac: usize,
        dc: usize,
        found_ac: usize,
        found_dc: usize,
    },
}

/// Steady-state frequency of a converter for dc voltage `v` and dc network
/// injection `p_dc`.
pub fn converter_steady_map(params: &ConverterParams, v: f64, p_dc: f64) -> f64 {
    let (mp, kt, g, kg) = (params.p_droop, params.vdc_droop, params.conductance, params.k_g());
    (mp * g + mp * kg + kt) * v + mp * p_dc
}

/// Frequency per unit of ac power for a lossless converter with a responsive
/// source and no dc network: `-(m_p + k_θ / k_g)`.
pub fn droop_characteristic(params: &ConverterParams) -> Result<f64, SteadyStateError> {
    let kg = params.k_g();
    if kg <= 0.0 {
        return Err(SteadyStateError::RequiresPositiveKg);
    }
    if params.conductance != 0.0 {
        return Err(SteadyStateError::PreconditionViolated(
            "droop characteristic assumes zero conductance".into(),
        ));
    }
    Ok(-(params.p_droop + params.vdc_droop / kg))
}

/// Share of a converter's dc injection that reaches its ac subgrid balance.
pub fn delta_ac(m_p: f64, k_theta: f64, conductance: f64, k_g: f64) -> f64 {
    k_theta / (k_theta + m_p * (conductance + k_g))
}

/// Frequency stiffness a converter contributes to its ac subgrid.
pub fn gamma_ac_converter(m_p: f64, k_theta: f64, conductance: f64, k_g: f64) -> f64 {
    (conductance + k_g) / (k_theta + m_p * (conductance + k_g))
}

pub fn gamma_ac_machine(damping: f64, k_g: f64) -> f64 {
    damping + k_g
}

/// Voltage stiffness a converter contributes to its dc subgrid.
pub fn gamma_dc_converter(m_p: f64, k_theta: f64, conductance: f64, k_g: f64) -> f64 {
    k_theta / m_p + conductance + k_g
}

pub fn gamma_dc_bus(conductance: f64, k_g: f64) -> f64 {
    conductance + k_g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// Synchronous frequency deviation of each ac subgrid.
    pub omega_s: Vec<f64>,
    /// Angles in `θ` order, referenced to zero at the first node of each ac subgrid.
    pub theta: DVector<f64>,
    /// Full state `(η, ω, v, P, P̄)`.
    pub state: DVector<f64>,
    /// Ac power injection per `θ` entry, `L_ac θ + P_d,ac`.
    pub p_ac: DVector<f64>,
    /// Dc network injection per `v` entry, `L_dc v + P_d,dc`.
    pub p_dc: DVector<f64>,
    /// Smallest over largest singular value of the augmented system.
    pub conditioning: f64,
    pub ill_conditioned: bool,
}

impl Equilibrium {
    pub fn omega<'a>(&'a self, model: &SystemModel) -> nalgebra::DVectorView<'a, f64> {
        self.state.rows(model.layout.omega.start, model.layout.omega.len())
    }

    pub fn v<'a>(&'a self, model: &SystemModel) -> nalgebra::DVectorView<'a, f64> {
        self.state.rows(model.layout.v.start, model.layout.v.len())
    }

    pub fn p<'a>(&'a self, model: &SystemModel) -> nalgebra::DVectorView<'a, f64> {
        self.state.rows(model.layout.p.start, model.layout.p.len())
    }
}

fn check_dims(model: &SystemModel, d: &Disturbance) -> Result<(), SteadyStateError> {
    let (ac, dc) = (model.theta_nodes.len(), model.v_nodes.len());
    if d.ac.len() != ac || d.dc.len() != dc {
        return Err(SteadyStateError::DimensionMismatch {
            ac,
            dc,
            found_ac: d.ac.len(),
            found_dc: d.dc.len(),
        });
    }
    Ok(())
}

/// Solves for the synchronous steady state under constant loads.
pub fn solve_equilibrium(model: &SystemModel, disturbance: &Disturbance) -> Result<Equilibrium, SteadyStateError> {
    check_dims(model, disturbance)?;
    let nm = model.n_machines;
    let nc = model.n_converters;
    let nt = model.theta_nodes.len();
    let nv = model.v_nodes.len();
    let ng = model.k_g.len();
    let ngi = model.t_g_idle.len();
    let nsub = model.n_ac_subgrids;

    // Unknown offsets.
    let c_theta = 0;
    let c_ws = nt;
    let c_om = c_ws + nsub;
    let c_v = c_om + nm;
    let c_p = c_v + nv;
    let c_pb = c_p + ng;
    let n = c_pb + ngi;
    // Equation offsets.
    let r_rate = 0;
    let r_om = nt;
    let r_v = r_om + nm;
    let r_p = r_v + nv;
    let r_pb = r_p + ng;
    let r_ref = r_pb + ngi;
    debug_assert_eq!(r_ref + nsub, n);

    let lap = &model.b_ac * DMatrix::from_diagonal(&model.w_ac) * model.b_ac.transpose();
    let pd_ac = &disturbance.ac;
    let pd_dc = &disturbance.dc;

    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);

    for k in 0..nt {
        let sub = model.theta_subgrid[k];
        m[(r_rate + k, c_ws + sub)] = -1.0;
        if k < nm {
            m[(r_rate + k, c_om + k)] = 1.0;
        } else {
            let c = k - nm;
            let mp = model.m_p[c];
            for j in 0..nt {
                m[(r_rate + k, c_theta + j)] = -mp * lap[(k, j)];
            }
            m[(r_rate + k, c_v + c)] = model.k_theta[c];
            rhs[r_rate + k] = mp * pd_ac[k];
        }
    }

    for k in 0..nm {
        for j in 0..nt {
            m[(r_om + k, c_theta + j)] = -lap[(k, j)];
        }
        m[(r_om + k, c_om + k)] = -model.damping[k];
        rhs[r_om + k] = pd_ac[k];
    }
    put(&mut m, r_om, c_p, &model.i_g_ac);
    put(&mut m, r_om, c_pb, &model.ibar_g_ac);

    let g_plus_l = DMatrix::from_diagonal(&model.conductance) + &model.l_dc;
    put(&mut m, r_v, c_v, &(-g_plus_l));
    for c in 0..nc {
        for j in 0..nt {
            m[(r_v + c, c_theta + j)] = -lap[(nm + c, j)];
        }
        rhs[r_v + c] += pd_ac[nm + c];
    }
    for r in 0..nv {
        rhs[r_v + r] += pd_dc[r];
    }
    put(&mut m, r_v, c_p, &model.i_g_dc);
    put(&mut m, r_v, c_pb, &model.ibar_g_dc);

    let kg = DMatrix::from_diagonal(&model.k_g);
    put(&mut m, r_p, c_om, &(-(&kg * model.i_g_ac.transpose())));
    put(&mut m, r_p, c_v, &(-(&kg * model.i_g_dc.transpose())));
    put(&mut m, r_p, c_p, &(-DMatrix::identity(ng, ng)));
    put(&mut m, r_pb, c_pb, &DMatrix::identity(ngi, ngi));

    for sub in 0..nsub {
        let first = model
            .theta_subgrid
            .iter()
            .position(|&s| s == sub)
            .expect("every ac subgrid has a node");
        m[(r_ref + sub, c_theta + first)] = 1.0;
    }

    let sv = linalg::singular_values(&m);
    let conditioning = match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        (None, None) => 1.0,
        _ => 0.0,
    };
    if conditioning < SINGULAR_RATIO {
        return Err(SteadyStateError::SingularEquilibrium(conditioning));
    }
    let z = m
        .lu()
        .solve(&rhs)
        .ok_or(SteadyStateError::SingularEquilibrium(conditioning))?;

    let theta = z.rows(c_theta, nt).into_owned();
    let omega_s: Vec<f64> = z.rows(c_ws, nsub).iter().copied().collect();
    let eta = model.eta_from_theta(&theta);
    let state = linalg::concat(&[
        &eta,
        &z.rows(c_om, nm).into_owned(),
        &z.rows(c_v, nv).into_owned(),
        &z.rows(c_p, ng).into_owned(),
        &z.rows(c_pb, ngi).into_owned(),
    ]);
    let v = z.rows(c_v, nv).into_owned();
    let p_ac = &lap * &theta + pd_ac;
    let p_dc = &model.l_dc * &v + pd_dc;

    Ok(Equilibrium {
        omega_s,
        theta,
        state,
        p_ac,
        p_dc,
        conditioning,
        ill_conditioned: conditioning < ILL_CONDITIONED_RATIO,
    })
}

/// Per-subgrid aggregates of the steady-state relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateAggregates {
    /// `δ_ac` per converter.
    pub delta_ac: Vec<f64>,
    /// `γ_ac` per `θ` entry.
    pub gamma_ac: Vec<f64>,
    /// `γ_dc` per `v` entry.
    pub gamma_dc: Vec<f64>,
}

pub fn aggregates(model: &SystemModel) -> SteadyStateAggregates {
    let nm = model.n_machines;
    let nc = model.n_converters;
    let conv = |c: usize| (model.m_p[c], model.k_theta[c], model.conductance[c], model.v_k_g[c]);
    let delta_ac = (0..nc)
        .map(|c| {
            let (mp, kt, g, kg) = conv(c);
            delta_ac(mp, kt, g, kg)
        })
        .collect();
    let gamma_ac = (0..nm)
        .map(|k| gamma_ac_machine(model.damping[k], model.machine_k_g[k]))
        .chain((0..nc).map(|c| {
            let (mp, kt, g, kg) = conv(c);
            gamma_ac_converter(mp, kt, g, kg)
        }))
        .collect();
    let gamma_dc = (0..model.v_nodes.len())
        .map(|r| {
            if r < nc {
                let (mp, kt, g, kg) = conv(r);
                gamma_dc_converter(mp, kt, g, kg)
            } else {
                gamma_dc_bus(model.conductance[r], model.v_k_g[r])
            }
        })
        .collect();
    SteadyStateAggregates {
        delta_ac,
        gamma_ac,
        gamma_dc,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBalance {
    pub subgrid: usize,
    pub solver: f64,
    /// Closed-form frequency; absent when the subgrid has zero total stiffness.
    pub closed_form: Option<f64>,
    /// `|closed_form − solver|`, or the absolute balance error when the
    /// closed form is undefined.
    pub residual: f64,
}

/// Checks each ac subgrid frequency against the closed-form balance.
pub fn frequency_balance(
    model: &SystemModel,
    eq: &Equilibrium,
    disturbance: &Disturbance,
) -> Vec<FrequencyBalance> {
    let agg = aggregates(model);
    let nm = model.n_machines;
    (0..model.n_ac_subgrids)
        .map(|sub| {
            let mut stiffness = 0.0;
            let mut load = 0.0;
            for k in 0..model.theta_nodes.len() {
                if model.theta_subgrid[k] != sub {
                    continue;
                }
                stiffness += agg.gamma_ac[k];
                load += disturbance.ac[k];
                if k >= nm {
                    load += agg.delta_ac[k - nm] * eq.p_dc[k - nm];
                }
            }
            let solver = eq.omega_s[sub];
            if stiffness > 0.0 {
                let closed = -load / stiffness;
                FrequencyBalance {
                    subgrid: sub,
                    solver,
                    closed_form: Some(closed),
                    residual: (closed - solver).abs(),
                }
            } else {
                FrequencyBalance {
                    subgrid: sub,
                    solver,
                    closed_form: None,
                    residual: load.abs(),
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageBalance {
    pub subgrid: usize,
    pub weighted_voltage: f64,
    pub expected: f64,
    pub residual: f64,
}

/// Checks the weighted dc voltage sum of each dc subgrid.
pub fn voltage_balance(model: &SystemModel, eq: &Equilibrium, disturbance: &Disturbance) -> Vec<VoltageBalance> {
    let agg = aggregates(model);
    let v = eq.v(model);
    let nm = model.n_machines;
    (0..model.n_dc_subgrids)
        .map(|sub| {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for r in 0..model.v_nodes.len() {
                if model.v_subgrid[r] != sub {
                    continue;
                }
                lhs += agg.gamma_dc[r] * v[r];
                rhs -= disturbance.dc[r];
                if r < model.n_converters {
                    let ac_sub = model.theta_subgrid[nm + r];
                    rhs += eq.omega_s[ac_sub] / model.m_p[r];
                }
            }
            VoltageBalance {
                subgrid: sub,
                weighted_voltage: lhs,
                expected: rhs,
                residual: (lhs - rhs).abs(),
            }
        })
        .collect()
}

/// For a lossless, sourceless, unloaded dc subgrid whose converters share
/// identical gains: `|mean over converters of (k_θ v_l − ω_s^{j_l})|`,
/// which vanishes at equilibrium.
pub fn hvdc_average_identity(
    model: &SystemModel,
    eq: &Equilibrium,
    disturbance: &Disturbance,
    dc_subgrid: usize,
) -> Result<f64, SteadyStateError> {
    let members: Vec<usize> = (0..model.v_nodes.len())
        .filter(|&r| model.v_subgrid[r] == dc_subgrid)
        .collect();
    let converters: Vec<usize> = members.iter().copied().filter(|&r| r < model.n_converters).collect();
    let fail = |why: String| Err(SteadyStateError::PreconditionViolated(why));
    if converters.is_empty() {
        return fail(format!("dc subgrid {dc_subgrid} has no converters"));
    }
    for &r in &members {
        let id = &model.layout.v_ids[r];
        if model.conductance[r] != 0.0 {
            return fail(format!("node `{id}` has positive conductance"));
        }
        if model.v_k_g[r] != 0.0 {
            return fail(format!("node `{id}` has a responsive source"));
        }
        if disturbance.dc[r] != 0.0 {
            return fail(format!("node `{id}` carries a dc load"));
        }
    }
    let (mp0, kt0) = (model.m_p[converters[0]], model.k_theta[converters[0]]);
    if converters.iter().any(|&c| model.m_p[c] != mp0 || model.k_theta[c] != kt0) {
        return fail(format!("converter gains differ within dc subgrid {dc_subgrid}"));
    }
    let v = eq.v(model);
    let sum: f64 = converters
        .iter()
        .map(|&c| kt0 * v[c] - eq.omega_s[model.theta_subgrid[model.n_machines + c]])
        .sum();
    Ok((sum / converters.len() as f64).abs())
}
