//! Exact distances between finitely supported laws, the inequalities that
//! relate them, and brute-force oracles for tilts and proximal maps.

mod assignment;
mod distances;
mod inequalities;
mod oracles;

pub use assignment::min_cost_assignment;
pub use distances::{
    tv_discrete, tv_to_samples, tv_weights, w1_empirical, w2_empirical, wasserstein_1d, EmpiricalLaw, MAX_ASSIGNMENT,
};
pub use inequalities::{
    check_mixture_error, check_rejection_stability, check_tv_to_w2, check_w1_to_w2, check_weight_stability, reweight,
    InequalityCheck, MixtureInstance,
};
pub use oracles::{oracle_kl_tilt, oracle_prox_grid, row_space_basis, GridProx};
