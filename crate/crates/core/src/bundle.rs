//! Dense JSON export of the assembled model, for use in other tools.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::to_rows;
use crate::system::SystemModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixBundle {
    pub state_labels: Vec<String>,
    /// Node ids in angle order (machines, then converters).
    pub theta_ids: Vec<String>,
    /// Node ids in dc voltage order (converters, then dc buses).
    pub v_ids: Vec<String>,
    pub edge_ids: Vec<String>,
    /// Diagonal of `T`.
    pub t: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub e_d: Vec<Vec<f64>>,
    pub b_ac: Vec<Vec<f64>>,
    pub w_ac: Vec<f64>,
    pub l_dc: Vec<Vec<f64>>,
    pub selections: Selections,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selections {
    pub machines: Vec<Vec<f64>>,
    pub ac_converters: Vec<Vec<f64>>,
    pub dc_converters: Vec<Vec<f64>>,
    pub dc_buses: Vec<Vec<f64>>,
    pub ac_sources: Vec<Vec<f64>>,
    pub dc_sources: Vec<Vec<f64>>,
    pub ac_idle_sources: Vec<Vec<f64>>,
    pub dc_idle_sources: Vec<Vec<f64>>,
}

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    to_rows(m)
}

impl MatrixBundle {
    pub fn new(model: &SystemModel) -> Self {
        Self {
            state_labels: model.layout.labels(),
            theta_ids: model.theta_ids.clone(),
            v_ids: model.layout.v_ids.clone(),
            edge_ids: model.layout.edge_ids.clone(),
            t: vec(&model.t),
            a: rows(&model.a),
            e_d: rows(&model.e_d),
            b_ac: rows(&model.b_ac),
            w_ac: vec(&model.w_ac),
            l_dc: rows(&model.l_dc),
            selections: Selections {
                machines: rows(&model.i_ac),
                ac_converters: rows(&model.i_cac),
                dc_converters: rows(&model.i_cdc),
                dc_buses: rows(&model.i_dc),
                ac_sources: rows(&model.i_g_ac),
                dc_sources: rows(&model.i_g_dc),
                ac_idle_sources: rows(&model.ibar_g_ac),
                dc_idle_sources: rows(&model.ibar_g_dc),
            },
        }
    }
}
