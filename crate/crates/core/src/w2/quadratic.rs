use super::ProxOracle;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, sym_eigen, Matrix, Vector};

/// Bisection rounds on the ball multiplier.
const BISECTION_ROUNDS: usize = 100;

#[derive(Debug, Clone)]
pub struct QuadraticSolution {
    pub x: Vector,
    /// Multiplier of the ball constraint (0 when inactive).
    pub nu: f64,
    /// `‖(B + (λ+ν)I)x − (b/2 + λy)‖`.
    pub kkt_residual: f64,
}

/// Proximal map of the concave quadratic `r(x) = −xᵀBx + <b, x> + c`,
/// with `B` factored once.
#[derive(Debug, Clone)]
pub struct QuadraticProx {
    b_mat: Matrix,
    b: Vector,
    lambda: f64,
    radius: f64,
    eig_vals: Vector,
    eig_vecs: Matrix,
}

impl QuadraticProx {
    pub fn new(b_mat: Matrix, b: Vector, lambda: f64, radius: f64) -> Result<Self> {
        let d = b.len();
        if b_mat.nrows() != d || b_mat.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: b_mat.nrows() });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if !crate::linalg::is_symmetric(&b_mat, 1e-12) {
            return Err(Error::invalid("quadratic reward matrix must be symmetric"));
        }
        let (eig_vals, eig_vecs) = sym_eigen(&b_mat);
        let tol = 1e-12 * b_mat.amax().max(1.0);
        if eig_vals.min() < -tol {
            return Err(Error::Precondition(format!(
                "reward matrix has eigenvalue {} < 0, so the reward is not concave; use the lowrank backend",
                eig_vals.min()
            )));
        }
        Ok(Self { b_mat, b, lambda, radius, eig_vals, eig_vecs })
    }

    fn solve_shifted(&self, coeffs: &Vector, nu: f64) -> Vector {
        let scaled = Vector::from_fn(coeffs.len(), |i, _| coeffs[i] / (self.eig_vals[i].max(0.0) + self.lambda + nu));
        &self.eig_vecs * scaled
    }

    pub fn solve(&self, y: &Vector) -> Result<QuadraticSolution> {
        check_dim(self.b.len(), y.len())?;
        if !all_finite(y) {
            return Err(Error::invalid("prox query must be finite"));
        }
        let rhs = &self.b * 0.5 + y * self.lambda;
        let coeffs = self.eig_vecs.tr_mul(&rhs);
        let mut nu = 0.0;
        let mut x = self.solve_shifted(&coeffs, 0.0);
        if x.norm() > self.radius {
            // ‖x(ν)‖ decreases in ν and is at most ‖rhs‖/(λ+ν).
            let (mut lo, mut hi) = (0.0, self.lambda + rhs.norm() / self.radius);
            for _ in 0..BISECTION_ROUNDS {
                let mid = 0.5 * (lo + hi);
                if self.solve_shifted(&coeffs, mid).norm() > self.radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            nu = hi;
            x = self.solve_shifted(&coeffs, nu);
            let n = x.norm();
            if n > self.radius {
                x *= self.radius / n;
            }
        }
        let kkt_residual = (&self.b_mat * &x + &x * (self.lambda + nu) - &rhs).norm();
        Ok(QuadraticSolution { x, nu, kkt_residual })
    }
}

impl ProxOracle for QuadraticProx {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn prox(&self, y: &Vector) -> Result<Vector> {
        Ok(self.solve(y)?.x)
    }

    fn name(&self) -> &'static str {
        "quad"
    }
}

/// One-shot maximiser of `−xᵀBx + <b, x> − λ‖x − y‖²` over `B(C)`.
///
/// Unconstrained: `x* = (B + λI)⁻¹(b/2 + λy)`. Otherwise the multiplier
/// `ν ≥ 0` of `‖x‖ ≤ C` is found by bisection on `‖x(ν)‖ = C`.
pub fn prox_quadratic(b_mat: &Matrix, b: &Vector, lambda: f64, y: &Vector, radius: f64) -> Result<QuadraticSolution> {
    QuadraticProx::new(b_mat.clone(), b.clone(), lambda, radius)?.solve(y)
}
