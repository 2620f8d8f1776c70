use super::ProxOracle;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, project_ball, Vector};
use crate::rewards::RewardSpec;

/// Projected gradient ascent on the `2λ`-strongly concave prox objective,
/// with backtracking on the step size.
#[derive(Debug, Clone)]
pub struct PgaProx {
    reward: RewardSpec,
    lambda: f64,
    radius: f64,
    /// Stop once the gradient-mapping norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct PgaOutcome {
    pub x: Vector,
    pub iterations: usize,
    pub mapping_norm: f64,
}

impl PgaProx {
    pub fn new(reward: RewardSpec, lambda: f64, radius: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if !reward.curvature().is_concave() {
            return Err(Error::Precondition(
                "projected gradient ascent needs a concave reward; use the lowrank backend".into(),
            ));
        }
        Ok(Self { reward, lambda, radius, tol: 1e-10, max_iter: 200_000 })
    }

    pub fn solve(&self, y: &Vector) -> Result<PgaOutcome> {
        check_dim(self.reward.dim(), y.len())?;
        if !all_finite(y) {
            return Err(Error::invalid("prox query must be finite"));
        }
        let mut x = project_ball(y, self.radius);
        let grad = |x: &Vector| -> Result<Vector> { Ok(self.reward.gradient(x)? - (x - y) * (2.0 * self.lambda)) };
        let mut g = grad(&x)?;
        let max_step = 1.0 / (2.0 * self.lambda);
        let mut step = max_step;
        let mut mapping_norm = f64::INFINITY;
        for it in 0..self.max_iter {
            step = (step * 2.0).min(max_step);
            // Accept once the step is below the inverse local curvature along the move;
            // this compares gradients, so it stays reliable where objective values cancel.
            loop {
                let next = project_ball(&(&x + &g * step), self.radius);
                let diff = &next - &x;
                let g_next = grad(&next)?;
                let dd = diff.norm_squared();
                if -(&g_next - &g).dot(&diff) * step <= dd || dd == 0.0 {
                    mapping_norm = diff.norm() / step;
                    x = next;
                    g = g_next;
                    break;
                }
                step *= 0.5;
                if step < 1e-300 {
                    return Err(Error::Numerical(format!(
                        "no ascent step found at iteration {it}; last gradient-mapping norm {mapping_norm:e}"
                    )));
                }
            }
            if mapping_norm <= self.tol {
                return Ok(PgaOutcome { x, iterations: it + 1, mapping_norm });
            }
        }
        Err(Error::Numerical(format!(
            "projected gradient ascent did not converge in {} iterations (gradient-mapping norm {mapping_norm:e}, tol {:e})",
            self.max_iter, self.tol
        )))
    }
}

impl ProxOracle for PgaProx {
    fn dim(&self) -> usize {
        self.reward.dim()
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
        "pga"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::rewards::LowDimFunction;

    #[test]
    fn negative_abs() {
        let f =
            LowDimFunction::min_affine(vec![(Vector::from_vec(vec![-1.0]), 0.0), (Vector::from_vec(vec![1.0]), 0.0)])
                .unwrap();
        let r = RewardSpec::low_rank(Matrix::identity(1, 1), f).unwrap();
        let x = PgaProx::new(r, 1.0, 10.0).unwrap().prox(&Vector::from_vec(vec![2.0])).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn constant_reward_projects() {
        let r = RewardSpec::quadratic(Matrix::zeros(2, 2), Vector::zeros(2), 4.0).unwrap();
        let p = PgaProx::new(r, 0.5, 1.0).unwrap();
        let x = p.prox(&Vector::from_vec(vec![0.0, -2.0])).unwrap();
        assert!((x - Vector::from_vec(vec![0.0, -1.0])).norm() < 1e-9);
        let x = p.prox(&Vector::from_vec(vec![0.2, 0.1])).unwrap();
        assert!((x - Vector::from_vec(vec![0.2, 0.1])).norm() < 1e-12);
    }

    #[test]
    fn agrees_with_closed_form() {
        let b_mat = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = Vector::from_vec(vec![1.0, -3.0]);
        let r = RewardSpec::quadratic(b_mat.clone(), b.clone(), 0.0).unwrap();
        let y = Vector::from_vec(vec![1.5, 0.5]);
        for radius in [10.0, 0.5] {
            let pga = PgaProx::new(r.clone(), 0.3, radius).unwrap().prox(&y).unwrap();
            let exact = super::super::prox_quadratic(&b_mat, &b, 0.3, &y, radius).unwrap().x;
            assert!((pga - exact).norm() < 1e-6);
        }
    }

    #[test]
    fn convex_reward_is_refused() {
        let r = RewardSpec::quadratic(Matrix::from_element(1, 1, -1.0), Vector::zeros(1), 0.0).unwrap();
        assert!(matches!(PgaProx::new(r, 1.0, 1.0), Err(Error::Precondition(_))));
    }
}
