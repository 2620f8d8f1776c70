use serde::Serialize;

use super::{tv_weights, w2_empirical, EmpiricalLaw};
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// `lhs ≤ rhs + tol`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs + tol }
    }

    /// `rhs − lhs`.
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// `W₂ ≤ 2C√TV` for laws on `B(C)`.
pub fn check_tv_to_w2(tv: f64, radius: f64, w2: f64) -> InequalityCheck {
    InequalityCheck::new(w2, 2.0 * radius * tv.max(0.0).sqrt(), 1e-9)
}

/// `W₂ ≤ √(2C·W₁)` for laws on `B(C)`.
pub fn check_w1_to_w2(w1: f64, radius: f64, w2: f64) -> InequalityCheck {
    InequalityCheck::new(w2, (2.0 * radius * w1.max(0.0)).sqrt(), 1e-9)
}

/// `TV(â/Σâ, a/Σa) ≤ η/(1−η)` when `â_i ∈ [(1−η)a_i, (1+η)a_i]`.
pub fn check_weight_stability(a: &[f64], a_hat: &[f64], eta: f64) -> Result<InequalityCheck> {
    if a.len() != a_hat.len() || a.is_empty() {
        return Err(Error::invalid("weight vectors must match and be nonempty"));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must lie in [0, 1), got {eta}")));
    }
    for (x, y) in a.iter().zip(a_hat) {
        if !(*x > 0.0 && *y >= (1.0 - eta) * x * (1.0 - 1e-15) && *y <= (1.0 + eta) * x * (1.0 + 1e-15)) {
            return Err(Error::invalid(format!("perturbed weight {y} is not within a factor 1±{eta} of {x}")));
        }
    }
    let norm = |v: &[f64]| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect::<Vec<_>>()
    };
    Ok(InequalityCheck::new(tv_weights(&norm(a_hat), &norm(a)), eta / (1.0 - eta), 1e-12))
}

/// Two mixtures over components on a common ball.
#[derive(Debug, Clone)]
pub struct MixtureInstance {
    pub radius: f64,
    pub pi: Vec<f64>,
    pub pi_hat: Vec<f64>,
    pub parts: Vec<EmpiricalLaw>,
    pub parts_hat: Vec<EmpiricalLaw>,
}

/// `W₂(Σπ̂_iQ̂_i, Σπ_iQ_i) ≤ ε + 2C√α` with `ε = max_i W₂(Q̂_i, Q_i)` and
/// `α = TV(π̂, π)`, all computed exactly.
pub fn check_mixture_error(inst: &MixtureInstance) -> Result<InequalityCheck> {
    if inst.parts.len() != inst.parts_hat.len() {
        return Err(Error::invalid("component lists differ in length"));
    }
    let mut eps = 0.0f64;
    for (q, qh) in inst.parts.iter().zip(&inst.parts_hat) {
        eps = eps.max(w2_empirical(q, qh)?);
    }
    let alpha = tv_weights(&inst.pi, &inst.pi_hat);
    let q = EmpiricalLaw::mixture(&inst.pi, &inst.parts)?;
    let qh = EmpiricalLaw::mixture(&inst.pi_hat, &inst.parts_hat)?;
    Ok(InequalityCheck::new(w2_empirical(&qh, &q)?, eps + 2.0 * inst.radius * alpha.sqrt(), 1e-9))
}

/// `R_a(Q)`: `Q` reweighted by `a` and renormalised.
pub fn reweight(q: &EmpiricalLaw, a: &dyn Fn(&Vector) -> f64) -> Result<EmpiricalLaw> {
    let raw: Vec<f64> = q.points().iter().zip(q.weights()).map(|(x, w)| w * a(x)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("reweighting removes all mass"));
    }
    EmpiricalLaw::weighted(q.points().to_vec(), raw.iter().map(|w| w / total).collect())
}

/// `W₂(R_a(Q), R_a(Q̂)) ≤ √(2C(1 + 2C·L_a)/a₀ · W₂(Q, Q̂))` for `a ≥ a₀`
/// that is `L_a`-Lipschitz.
pub fn check_rejection_stability(
    q: &EmpiricalLaw,
    q_hat: &EmpiricalLaw,
    a: &dyn Fn(&Vector) -> f64,
    a0: f64,
    l_a: f64,
    radius: f64,
) -> Result<InequalityCheck> {
    if !(a0 > 0.0 && a0 <= 1.0) {
        return Err(Error::invalid(format!("acceptance floor must lie in (0, 1], got {a0}")));
    }
    let lhs = w2_empirical(&reweight(q, a)?, &reweight(q_hat, a)?)?;
    let w = w2_empirical(q, q_hat)?;
    let rhs = (2.0 * radius * (1.0 + 2.0 * radius * l_a) / a0 * w).sqrt();
    Ok(InequalityCheck::new(lhs, rhs, 1e-9))
}
