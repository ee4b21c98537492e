use nalgebra::{DMatrix, DVector};

use super::StabilityError;
use crate::linalg::{self, put};
use crate::system::SystemModel;

/// Quadratic LaSalle function
///
/// ```text
/// V = ½ ηᵀWη + ½ ωᵀMω + ½ vᵀK̃_θCv + ½ Pᵀ Π K_g⁻¹ T_g P,
/// Π = I_g,acᵀ I_g,ac + I_g,dcᵀ K̃_θ I_g,dc
/// ```
///
/// with zero weight on `P̄`. It is only a valid certificate when every dc
/// subgrid has consistent converter gains.
#[derive(Debug, Clone, PartialEq)]
pub struct LaSalleFunction {
    /// Diagonal of the quadratic form, so `V = ½ Σ weights_i x_i²`.
    pub weights: DVector<f64>,
    /// Symmetric `S` with `dV/dt = xᵀ S x` whenever `P̄ = 0`.
    pub derivative_form: DMatrix<f64>,
    state_matrix: DMatrix<f64>,
}

impl LaSalleFunction {
    pub fn new(model: &SystemModel) -> Result<Self, StabilityError> {
        if !model.condition1_holds() {
            return Err(StabilityError::CertificateInvalid);
        }
        let l = &model.layout;
        let pi = (model.i_g_ac.transpose() * &model.i_g_ac)
            + model.i_g_dc.transpose() * DMatrix::from_diagonal(&model.k_theta_tilde) * &model.i_g_dc;
        let pi_diag = pi.diagonal();
        let p_weight = DVector::from_iterator(
            l.p.len(),
            (0..l.p.len()).map(|k| pi_diag[k] * model.t_g[k] / model.k_g[k]),
        );
        let weights = linalg::concat(&[
            &model.w_ac,
            &model.inertia,
            &model.k_theta_tilde.component_mul(&model.capacitance),
            &p_weight,
            &DVector::zeros(l.p_bar.len()),
        ]);

        let w = DMatrix::from_diagonal(&model.w_ac);
        let cbw = &model.i_cac * &model.b_ac * &w;
        let kt = DMatrix::from_diagonal(&model.k_theta_tilde);
        let gl = DMatrix::from_diagonal(&model.conductance) + &model.l_dc;
        let mut s = DMatrix::zeros(model.dim(), model.dim());
        put(
            &mut s,
            l.eta.start,
            l.eta.start,
            &(-(cbw.transpose() * DMatrix::from_diagonal(&model.m_p) * &cbw)),
        );
        put(&mut s, l.omega.start, l.omega.start, &(-DMatrix::from_diagonal(&model.damping)));
        put(&mut s, l.v.start, l.v.start, &(-0.5 * (&kt * &gl + &gl * &kt)));
        let p_rate = DVector::from_iterator(l.p.len(), (0..l.p.len()).map(|k| pi_diag[k] / model.k_g[k]));
        put(&mut s, l.p.start, l.p.start, &(-DMatrix::from_diagonal(&p_rate)));

        Ok(Self {
            weights,
            derivative_form: s,
            state_matrix: model.state_matrix(),
        })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.iter().zip(self.weights.iter()).map(|(xi, wi)| wi * xi * xi).sum::<f64>()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.weights)
    }

    /// Closed-form time derivative for the undisturbed dynamics with `P̄ = 0`.
    pub fn derivative(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.derivative_form * x))
    }

    /// `∇V(x)ᵀ T⁻¹ A x`, valid for any `x`.
    pub fn chain_rule_derivative(&self, x: &DVector<f64>) -> f64 {
        self.gradient(x).dot(&(&self.state_matrix * x))
    }
}
