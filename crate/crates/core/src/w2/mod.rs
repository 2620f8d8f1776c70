//! Wasserstein alignment: `Q_λ = (T_λ)_# P` with the proximal transport map
//! `T_λ(y) ∈ argmax_{‖x‖ ≤ C} r(x) − λ‖x − y‖²`.

mod concave;
mod lowrank;
mod quadratic;
mod sampler;

pub use concave::{PgaOutcome, PgaProx};
pub use lowrank::{Alg2Params, LowRankDecomp, LowRankProx};
pub use quadratic::{prox_quadratic, QuadraticProx, QuadraticSolution};
pub use sampler::{objective_value, sample_w2_aligned, CoupledBatch, ObjectiveEstimate};

use crate::error::Result;
use crate::linalg::Vector;

/// Evaluation of `T_λ` on a fixed reward, `λ` and radius.
pub trait ProxOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn radius(&self) -> f64;
    fn lambda(&self) -> f64;
    fn prox(&self, y: &Vector) -> Result<Vector>;
    fn name(&self) -> &'static str;
}

/// `r(x) − λ‖x − y‖²` given `r(x)`.
pub fn prox_objective(r_x: f64, lambda: f64, x: &Vector, y: &Vector) -> f64 {
    r_x - lambda * (x - y).norm_squared()
}
