//! Small numeric helpers shared by the samplers and oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Euclidean projection onto the closed ball of radius `radius` centred at 0.
pub fn project_ball(x: &Vector, radius: f64) -> Vector {
    let n = x.norm();
    if n <= radius {
        x.clone()
    } else {
        x * (radius / n)
    }
}

/// In-place variant of [`project_ball`].
pub fn project_ball_mut(x: &mut Vector, radius: f64) {
    let n = x.norm();
    if n > radius {
        *x *= radius / n;
    }
}

/// `log Σ exp(a_i)` with max-shift. Returns `-inf` for an empty slice.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + a.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Normalised softmax weights of `a` (computed from log-weights).
pub fn softmax(a: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(a);
    let mut w: Vec<f64> = a.iter().map(|&v| (v - lse).exp()).collect();
    let s: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= s;
    }
    w
}

/// Largest singular value.
pub fn operator_norm(a: &Matrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values().max()
}

/// Symmetric eigendecomposition, returned as (eigenvalues, eigenvectors).
pub fn sym_eigen(m: &Matrix) -> (Vector, Matrix) {
    let e = SymmetricEigen::new(m.clone());
    (e.eigenvalues, e.eigenvectors)
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn all_finite(x: &Vector) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Lexicographic comparison of two equal-length vectors.
pub fn lex_cmp(a: &Vector, b: &Vector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

pub(crate) fn vec_from(rows: &[Vec<f64>]) -> Vec<Vector> {
    rows.iter().map(|r| Vector::from_vec(r.clone())).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_cases() {
        let x = Vector::from_vec(vec![0.0, 0.0]);
        assert_eq!(project_ball(&x, 1.0), x);
        let x = Vector::from_vec(vec![3.0, 4.0]);
        let p = project_ball(&x, 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_ball(&x, 10.0), x);
    }

    #[test]
    fn lse_is_shift_stable() {
        let a = [1000.0, 1000.0];
        assert!((log_sum_exp(&a) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
