//! Random problem instances shared by the property battery and tests.

use rand::Rng;

use crate::linalg::{operator_norm, Matrix, Vector};
use crate::metrics::EmpiricalLaw;
use crate::model::DiscreteModel;
use crate::rewards::{random_max_affine, LowDimFunction};
use crate::rng::{uniform_in_ball, SimRng};

/// Probability vector with entries bounded away from zero.
pub fn random_probs(rng: &mut SimRng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// Up to `max_atoms` atoms drawn uniformly from `B_d(C)` with random weights.
pub fn random_discrete(rng: &mut SimRng, max_atoms: usize, d: usize, radius: f64) -> DiscreteModel {
    let n = rng.random_range(2..=max_atoms.max(2));
    let atoms = (0..n).map(|_| uniform_in_ball(rng, d, radius)).collect();
    DiscreteModel::new(atoms, random_probs(rng, n), radius).expect("atoms lie in the ball")
}

/// `(A, f)` with `A ∈ ℝ^{k×d}` Gaussian and `f` a random max-affine function
/// whose Lipschitz constant times `‖A‖·C` is at most `lr_max`.
pub fn random_convex_lowrank(
    rng: &mut SimRng,
    d: usize,
    k: usize,
    radius: f64,
    lr_max: f64,
) -> (Matrix, LowDimFunction) {
    let a = Matrix::from_fn(k, d, |_, _| rng.random_range(-1.0..1.0));
    let big_r = operator_norm(&a) * radius;
    let pieces = rng.random_range(1..=6);
    let target = rng.random_range(0.2..=1.0) * lr_max / big_r.max(1e-12);
    let f = random_max_affine(rng, k, pieces, target);
    (a, f.with_radius(big_r))
}

/// Uniform weights on `n` points of `[−C, C]`.
pub fn random_line_law(rng: &mut SimRng, max_atoms: usize, radius: f64) -> EmpiricalLaw {
    let n = rng.random_range(1..=max_atoms.max(1));
    let pts = (0..n).map(|_| Vector::from_element(1, rng.random_range(-radius..=radius))).collect();
    EmpiricalLaw::weighted(pts, random_probs(rng, n)).expect("valid law")
}

/// Random PSD matrix `MᵀM·s`.
pub fn random_psd(rng: &mut SimRng, d: usize, scale: f64) -> Matrix {
    let m = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let b = m.transpose() * m * scale;
    (&b + b.transpose()) * 0.5
}
