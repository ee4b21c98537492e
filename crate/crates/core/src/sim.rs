//! Fixed-step RK4 integration of `T dx/dt = A x + E_d u(t)` with
//! piecewise-constant loads.
//!
//! Steps never straddle a load change: each constant segment is split into
//! equal steps no longer than `dt`. When the LaSalle function applies, its
//! value and rate are logged on the deviation from the equilibrium of the
//! current segment.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stability::LaSalleFunction;
use crate::steady_state::solve_equilibrium;
use crate::system::{Disturbance, Port, SystemModel};

/// States beyond this magnitude are treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("initial state has length {got}, model has {expected} states")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state diverged or became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid step: dt = {dt}, t_final = {t_final}")]
    InvalidStep { dt: f64, t_final: f64 },
    #[error("disturbance names unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no {port:?} port")]
    PortMismatch { node: String, port: Port },
    #[error("closed-form solution needs b2/b1 = m3/m2, got {ratio_b} and {ratio_m}")]
    RatioMismatch { ratio_b: f64, ratio_m: f64 },
    #[error("disturbance step starts at negative time {0}")]
    NegativeStart(f64),
}

/// One load change, held from `t_start` onward and added to earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    #[serde(default)]
    pub t_start: f64,
    pub node: String,
    pub delta: f64,
    /// Defaults to the ac side for machines and converters.
    #[serde(default)]
    pub port: Option<Port>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSchedule {
    pub steps: Vec<Step>,
}

impl DisturbanceSchedule {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn constant(node: &str, delta: f64) -> Self {
        Self {
            steps: vec![Step {
                t_start: 0.0,
                node: node.to_string(),
                delta,
                port: None,
            }],
        }
    }

    /// Index of each step in the stacked input vector.
    fn input_slots(&self, model: &SystemModel) -> Result<Vec<usize>, SimError> {
        let n_theta = model.theta_nodes.len();
        self.steps
            .iter()
            .map(|s| {
                if s.t_start < 0.0 || !s.t_start.is_finite() {
                    return Err(SimError::NegativeStart(s.t_start));
                }
                let ac = model.theta_index(&s.node);
                let dc = model.v_index(&s.node);
                if ac.is_none() && dc.is_none() {
                    return Err(SimError::UnknownNode(s.node.clone()));
                }
                let mismatch = |port| SimError::PortMismatch {
                    node: s.node.clone(),
                    port,
                };
                match s.port {
                    Some(Port::Ac) => ac.ok_or_else(|| mismatch(Port::Ac)),
                    Some(Port::Dc) => dc.map(|k| n_theta + k).ok_or_else(|| mismatch(Port::Dc)),
                    None => Ok(ac.unwrap_or_else(|| n_theta + dc.expect("checked above"))),
                }
            })
            .collect()
    }

    /// Load in effect at time `t`.
    pub fn at(&self, model: &SystemModel, t: f64) -> Result<Disturbance, SimError> {
        let slots = self.input_slots(model)?;
        Ok(self.sum(model, &slots, |s| s.t_start <= t))
    }

    /// Sum of every step, i.e. the load once all steps have occurred.
    pub fn total(&self, model: &SystemModel) -> Result<Disturbance, SimError> {
        let slots = self.input_slots(model)?;
        Ok(self.sum(model, &slots, |_| true))
    }

    fn sum(&self, model: &SystemModel, slots: &[usize], active: impl Fn(&Step) -> bool) -> Disturbance {
        let n_theta = model.theta_nodes.len();
        let mut d = Disturbance::zeros(model);
        for (s, &k) in self.steps.iter().zip(slots) {
            if active(s) {
                if k < n_theta {
                    d.ac[k] += s.delta;
                } else {
                    d.dc[k - n_theta] += s.delta;
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Keep every n-th step; the final state is always kept.
    pub record_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            dt: 1e-3,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub time: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// LaSalle value and rate on the deviation from the segment equilibrium;
    /// `None` when the certificate does not apply or an equilibrium is not
    /// unique.
    pub lasalle: Option<LaSalleLog>,
    /// Power flow per ac edge, `W η`, at each sample.
    pub edge_flows: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaSalleLog {
    pub value: Vec<f64>,
    pub rate: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    /// Largest `|ω|` over all machines and samples.
    pub fn max_abs_frequency(&self, model: &SystemModel) -> f64 {
        let r = model.layout.omega.clone();
        self.states
            .iter()
            .flat_map(|x| x.rows(r.start, r.len()).iter().map(|w| w.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

fn rk4_step(model: &SystemModel, x: &DVector<f64>, u: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = model.derivative(x, u);
    let k2 = model.derivative(&(x + &k1 * (h / 2.0)), u);
    let k3 = model.derivative(&(x + &k2 * (h / 2.0)), u);
    let k4 = model.derivative(&(x + &k3 * h), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn diverged(x: &DVector<f64>) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND)
}

pub fn simulate(
    model: &SystemModel,
    x0: &DVector<f64>,
    schedule: &DisturbanceSchedule,
    options: &SimOptions,
) -> Result<Trajectory, SimError> {
    let SimOptions {
        t_final,
        dt,
        record_every,
    } = *options;
    if !(dt > 0.0 && dt.is_finite() && t_final.is_finite() && t_final >= dt) {
        return Err(SimError::InvalidStep { dt, t_final });
    }
    if x0.len() != model.dim() {
        return Err(SimError::DimensionMismatch {
            expected: model.dim(),
            got: x0.len(),
        });
    }
    let record_every = record_every.max(1);

    let mut breaks: Vec<f64> = schedule
        .steps
        .iter()
        .map(|s| s.t_start)
        .filter(|&t| t > 0.0 && t < t_final)
        .collect();
    breaks.push(0.0);
    breaks.push(t_final);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let lasalle = LaSalleFunction::new(model).ok();
    let mut log = lasalle.as_ref().map(|_| LaSalleLog {
        value: Vec::new(),
        rate: Vec::new(),
    });

    let w = &model.w_ac;
    let eta = model.layout.eta.clone();
    let mut traj = Trajectory {
        labels: model.layout.labels(),
        time: Vec::new(),
        states: Vec::new(),
        lasalle: None,
        edge_flows: Vec::new(),
    };

    let mut x = x0.clone();
    let mut count = 0usize;
    for (seg, pair) in breaks.windows(2).enumerate() {
        let (t_a, t_b) = (pair[0], pair[1]);
        let disturbance = schedule.at(model, t_a)?;
        let u = disturbance.input();

        // Equilibrium of this segment, for the LaSalle log.
        let x_star = match log {
            Some(_) if u.iter().all(|&v| v == 0.0) => Some(DVector::zeros(model.dim())),
            Some(_) => solve_equilibrium(model, &disturbance).ok().map(|e| e.state),
            None => None,
        };
        if log.is_some() && x_star.is_none() {
            log = None;
        }

        let record = |t: f64, x: &DVector<f64>, traj: &mut Trajectory, log: &mut Option<LaSalleLog>| {
            traj.time.push(t);
            traj.states.push(x.clone());
            traj.edge_flows.push(x.rows(eta.start, eta.len()).component_mul(w));
            if let (Some(log), Some(f), Some(xs)) = (log.as_mut(), lasalle.as_ref(), x_star.as_ref()) {
                let dx = x - xs;
                log.value.push(f.value(&dx));
                log.rate.push(f.chain_rule_derivative(&dx));
            }
        };
        if seg == 0 {
            record(t_a, &x, &mut traj, &mut log);
        }

        let n = ((t_b - t_a) / dt).ceil().max(1.0) as usize;
        let h = (t_b - t_a) / n as f64;
        for k in 1..=n {
            x = rk4_step(model, &x, &u, h);
            count += 1;
            let t = if k == n { t_b } else { t_a + k as f64 * h };
            if diverged(&x) {
                return Err(SimError::NonFiniteState { t });
            }
            let last = k == n && t_b == t_final;
            // Segment ends are kept so the LaSalle log restarts cleanly.
            if count.is_multiple_of(record_every) || last || k == n {
                record(t, &x, &mut traj, &mut log);
            }
        }
    }
    traj.lasalle = log;
    Ok(traj)
}

/// State of the three-machine counterexample at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1State {
    pub eta: [f64; 2],
    pub omega: [f64; 3],
}

impl Example1State {
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.eta[0], self.eta[1], self.omega[0], self.omega[1], self.omega[2]])
    }
}

/// Closed-form periodic solution of the three-machine network with edges
/// 1-2 (susceptance `b1`) and 1-3 (`b2`), damping only on machine 1, and
/// `b2 / b1 = m3 / m2`. The orbit never reaches machine 1, so its damping
/// never acts.
pub fn closed_form_example1(b1: f64, b2: f64, m2: f64, m3: f64, t: f64) -> Result<Example1State, SimError> {
    let (ratio_b, ratio_m) = (b2 / b1, m3 / m2);
    if (ratio_b - ratio_m).abs() > 1e-12 * ratio_m.abs().max(1.0) {
        return Err(SimError::RatioMismatch { ratio_b, ratio_m });
    }
    let zeta = (b1 / m2).sqrt();
    let (s, c) = (zeta * t).sin_cos();
    Ok(Example1State {
        eta: [ratio_b * c, -c],
        omega: [0.0, b2 / (b1 * m2).sqrt() * s, -zeta * s],
    })
}
