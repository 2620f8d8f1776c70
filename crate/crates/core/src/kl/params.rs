use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derived parameters of the envelope rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alg1Params {
    /// Net resolution `1/(2L)`.
    pub h: f64,
    pub m: usize,
    /// Envelope gap `B = 1 + log m`.
    pub gap: f64,
    /// Acceptance floor `a₀ = e^{−B}`.
    pub a0: f64,
    /// Lipschitz constant of the acceptance map, `2L‖A‖`.
    pub l_a: f64,
    pub rho: f64,
    pub eps_lin: f64,
    pub eta: f64,
    pub n_rej: u64,
}

/// Parameter block for target accuracy `eps` with `m` envelope pieces:
///
/// * `ρ = min{ ε²a₀ / (32C(1 + 2C·L_a)), a₀ / (4·max{1, L_a}) }`
/// * `ε_lin = ρ/2`, `η = min{½, ρ²/(128C²)}`
/// * `N_rej = ⌈2a₀⁻¹ log(16C²/ε²)⌉`
pub fn compute_params(l: f64, a_opnorm: f64, radius: f64, m: usize, eps: f64) -> Result<Alg1Params> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if m == 0 {
        return Err(Error::invalid("envelope must have at least one piece"));
    }
    if !(l >= 0.0 && a_opnorm >= 0.0 && radius > 0.0) {
        return Err(Error::invalid("L, ‖A‖ must be nonnegative and C positive"));
    }
    let c = radius;
    let gap = 1.0 + (m as f64).ln();
    let a0 = (-gap).exp();
    let l_a = 2.0 * l * a_opnorm;
    let rho = (eps * eps * a0 / (32.0 * c * (1.0 + 2.0 * c * l_a))).min(a0 / (4.0 * l_a.max(1.0)));
    let eta = 0.5f64.min(rho * rho / (128.0 * c * c));
    let n_rej = (2.0 / a0 * (16.0 * c * c / (eps * eps)).ln()).ceil().max(1.0) as u64;
    Ok(Alg1Params {
        h: if l > 0.0 { 1.0 / (2.0 * l) } else { f64::INFINITY },
        m,
        gap,
        a0,
        l_a,
        rho,
        eps_lin: rho / 2.0,
        eta,
        n_rej,
    })
}
