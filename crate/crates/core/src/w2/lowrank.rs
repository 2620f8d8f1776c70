use serde::Serialize;

use super::ProxOracle;
use crate::error::{check_dim, Error, Result};
use crate::kl::{build_net, DEFAULT_NET_CAP};
use crate::linalg::{all_finite, lex_cmp, project_ball, sym_eigen, Matrix, Vector};
use crate::rewards::LowDimFunction;

/// Candidates within this of the best net value are tie-broken
/// lexicographically on the ambient point.
const TIE_TOL: f64 = 1e-9;

/// Compact SVD `A = U Σ V₁ᵀ` plus an orthonormal basis `V₀` of `ker A`.
#[derive(Debug, Clone)]
pub struct LowRankDecomp {
    pub u: Matrix,
    pub sigma: Vector,
    pub v1: Matrix,
    pub v0: Matrix,
    /// `‖A‖_op`.
    pub s: f64,
}

impl LowRankDecomp {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (k, d) = a.shape();
        if k == 0 || d == 0 || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection matrix must be finite and nonempty"));
        }
        // Right singular vectors from the Gram matrix keep V₁ and V₀ in one
        // orthonormal eigenbasis.
        let svd = a.clone().svd(true, true);
        let s_max = svd.singular_values.max();
        let tol = 1e-12 * s_max.max(1.0) * (k.max(d) as f64);
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol).collect();
        let r = keep.len();
        let u_full = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let u = Matrix::from_fn(k, r, |i, j| u_full[(i, keep[j])]);
        let sigma = Vector::from_fn(r, |j, _| svd.singular_values[keep[j]]);
        let v1 = Matrix::from_fn(d, r, |i, j| vt[(keep[j], i)]);
        let complement = Matrix::identity(d, d) - &v1 * v1.transpose();
        let (vals, vecs) = sym_eigen(&complement);
        let cols: Vec<usize> = (0..d).filter(|&i| vals[i] > 0.5).collect();
        if cols.len() != d - r {
            return Err(Error::Numerical(format!("kernel basis has {} columns, expected {}", cols.len(), d - r)));
        }
        let v0 = Matrix::from_fn(d, d - r, |i, j| vecs[(i, cols[j])]);
        Ok(Self { u, sigma, v1, v0, s: if r == 0 { 0.0 } else { s_max } })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn dim(&self) -> usize {
        self.v1.nrows()
    }

    /// `U Σ V₁ᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        &self.u * Matrix::from_diagonal(&self.sigma) * self.v1.transpose()
    }

    /// `U Σ u`, the argument of `f` for reduced coordinate `u`.
    pub fn lift(&self, u: &Vector) -> Vector {
        &self.u * self.sigma.component_mul(u)
    }
}

/// Net resolution and base-sampling accuracy for a target objective gap `eps`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Alg2Params {
    /// `H_ε = min{ ε/(6(LS + 4λC)), ε²/(288λ²C³) }`.
    pub h: f64,
    /// `ε/(24λC)`.
    pub eps_p: f64,
    /// `(1 + 2C/H_ε)^{r_A}`.
    pub net_bound: f64,
    pub rank: usize,
    pub net_size: usize,
}

impl Alg2Params {
    pub fn new(l: f64, s: f64, lambda: f64, radius: f64, eps: f64, rank: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        let c = radius;
        let h = (eps / (6.0 * (l * s + 4.0 * lambda * c))).min(eps * eps / (288.0 * lambda * lambda * c.powi(3)));
        Ok(Self {
            h,
            eps_p: eps / (24.0 * lambda * c),
            net_bound: (1.0 + 2.0 * c / h).powi(rank as i32),
            rank,
            net_size: 0,
        })
    }
}

/// Net-search proximal map for `r(x) = f(Ax)` with `f` Lipschitz
/// (value oracle only).
///
/// With `x = V₁u + V₀w`, the objective separates: for fixed `u` the best
/// `w` is the projection of `w_y = V₀ᵀy` onto the ball of radius
/// `ρ(u) = √(C² − ‖u‖²)`, leaving
/// `Φ_y(u) = f(UΣu) − λ[‖u − u_y‖² + (‖w_y‖ − ρ(u))₊²]` on `B_{r_A}(C)`.
#[derive(Debug, Clone)]
pub struct LowRankProx {
    decomp: LowRankDecomp,
    lambda: f64,
    radius: f64,
    params: Alg2Params,
    net: Vec<Vector>,
    f_vals: Vec<f64>,
}

impl LowRankProx {
    pub fn new(a: &Matrix, f: &LowDimFunction, lambda: f64, radius: f64, eps: f64) -> Result<Self> {
        Self::with_cap(a, f, lambda, radius, eps, DEFAULT_NET_CAP)
    }

    pub fn with_cap(a: &Matrix, f: &LowDimFunction, lambda: f64, radius: f64, eps: f64, cap: usize) -> Result<Self> {
        check_dim(f.dim(), a.nrows())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        let l =
            f.lipschitz().ok_or_else(|| Error::Precondition("net prox needs a declared Lipschitz constant".into()))?;
        let decomp = LowRankDecomp::new(a)?;
        let r = decomp.rank();
        let mut params = Alg2Params::new(l, decomp.s, lambda, radius, eps, r)?;
        let net = if r == 0 { vec![Vector::zeros(0)] } else { build_net(r, radius, params.h, cap)?.points().to_vec() };
        params.net_size = net.len();
        let f_vals = net
            .iter()
            .map(|u| {
                let v = f.value(&decomp.lift(u))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Oracle(format!("reward value oracle returned {v}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { decomp, lambda, radius, params, net, f_vals })
    }

    pub fn params(&self) -> &Alg2Params {
        &self.params
    }

    pub fn decomp(&self) -> &LowRankDecomp {
        &self.decomp
    }

    /// `T_λ(y)` and the net value `Φ_y(û)`.
    pub fn prox_with_value(&self, y: &Vector) -> Result<(Vector, f64)> {
        check_dim(self.decomp.dim(), y.len())?;
        if !all_finite(y) {
            return Err(Error::invalid("prox query must be finite"));
        }
        let u_y = self.decomp.v1.tr_mul(y);
        let w_y = self.decomp.v0.tr_mul(y);
        let w_norm = w_y.norm();
        let c2 = self.radius * self.radius;
        let values: Vec<f64> = self
            .net
            .iter()
            .zip(&self.f_vals)
            .map(|(u, fu)| {
                let rho = (c2 - u.norm_squared()).max(0.0).sqrt();
                fu - self.lambda * ((u - &u_y).norm_squared() + (w_norm - rho).max(0.0).powi(2))
            })
            .collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut chosen: Option<(Vector, f64)> = None;
        for (u, &val) in self.net.iter().zip(&values) {
            if val < best - TIE_TOL {
                continue;
            }
            let rho = (c2 - u.norm_squared()).max(0.0).sqrt();
            let w = project_ball(&w_y, rho);
            let x = project_ball(&(&self.decomp.v1 * u + &self.decomp.v0 * w), self.radius);
            if chosen.as_ref().is_none_or(|(cx, _)| lex_cmp(&x, cx).is_lt()) {
                chosen = Some((x, val));
            }
        }
        chosen.ok_or_else(|| Error::Numerical("net objective is not finite".into()))
    }
}

impl ProxOracle for LowRankProx {
    fn dim(&self) -> usize {
        self.decomp.dim()
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn prox(&self, y: &Vector) -> Result<Vector> {
        Ok(self.prox_with_value(y)?.0)
    }

    fn name(&self) -> &'static str {
        "lowrank"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_is_orthonormal() {
        let a = Matrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 2.0, 4.0, 0.0, -2.0]);
        let dc = LowRankDecomp::new(&a).unwrap();
        assert_eq!(dc.rank(), 1);
        assert!((dc.reconstruct() - &a).norm() < 1e-10);
        let q = Matrix::from_fn(4, 4, |i, j| if j < 1 { dc.v1[(i, j)] } else { dc.v0[(i, j - 1)] });
        assert!((q.transpose() * &q - Matrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn linear_reward_example() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let f = LowDimFunction::max_affine(vec![(Vector::from_vec(vec![1.0]), 0.0)]).unwrap();
        let p = LowRankProx::new(&a, &f, 1.0, 1.0, 0.1).unwrap();
        let (x, val) = p.prox_with_value(&Vector::from_vec(vec![0.0, 0.5])).unwrap();
        let h = p.params().h;
        assert!((x - Vector::from_vec(vec![0.5, 0.5])).norm() <= h);
        assert!((0.25 - 0.1 / 3.0..=0.25 + 1e-12).contains(&val));
    }

    #[test]
    fn constant_reward_projects_query() {
        let a = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let f = LowDimFunction::max_affine(vec![(Vector::zeros(1), 1.0)]).unwrap();
        let p = LowRankProx::new(&a, &f, 1.0, 1.0, 0.1).unwrap();
        let x = p.prox(&Vector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((x - Vector::from_vec(vec![0.6, 0.8])).norm() < 1e-12);
        let x = p.prox(&Vector::from_vec(vec![0.1, 0.2])).unwrap();
        assert!((x - Vector::from_vec(vec![0.1, 0.2])).norm() < 1e-12);
    }
}
