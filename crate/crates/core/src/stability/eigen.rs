use serde::{Deserialize, Serialize};

use crate::system::{reachable_subspace_basis, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenVerdict {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    /// Dimension of the reachable subspace.
    pub dimension: usize,
    /// `[re, im]` pairs sorted by decreasing real part.
    pub eigenvalues: Vec<[f64; 2]>,
    /// Spectral abscissa; `None` for an empty spectrum.
    pub max_real: Option<f64>,
    pub verdict: EigenVerdict,
}

/// Spectrum of `Qᵀ T⁻¹ A Q` with `Q` the reachable-subspace basis.
pub fn eigen_oracle(model: &SystemModel, tol_eig: f64) -> EigenReport {
    let q = reachable_subspace_basis(model);
    let reduced = q.transpose() * model.state_matrix() * &q;
    let mut eigenvalues: Vec<[f64; 2]> = if reduced.nrows() == 0 {
        Vec::new()
    } else {
        reduced.complex_eigenvalues().iter().map(|z| [z.re, z.im]).collect()
    };
    eigenvalues.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let max_real = eigenvalues.first().map(|z| z[0]);
    let abscissa = max_real.unwrap_or(f64::NEG_INFINITY);
    let verdict = if abscissa < -tol_eig {
        EigenVerdict::Stable
    } else if abscissa <= tol_eig {
        EigenVerdict::Marginal
    } else {
        EigenVerdict::Unstable
    };
    EigenReport {
        dimension: reduced.nrows(),
        eigenvalues,
        max_real,
        verdict,
    }
}
