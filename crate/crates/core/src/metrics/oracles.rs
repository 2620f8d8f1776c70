use crate::error::{check_dim, Error, Result};
use crate::linalg::{project_ball, Matrix, Vector};
use crate::model::DiscreteModel;
use crate::rewards::{RewardKind, RewardSpec};

/// `q_i ∝ p_i·exp(r(x_i))`, normalised in log space.
pub fn oracle_kl_tilt(p: &DiscreteModel, reward: &RewardSpec) -> Result<DiscreteModel> {
    let logs =
        p.atoms().iter().zip(p.probs()).map(|(x, w)| Ok(w.ln() + reward.eval(x)?)).collect::<Result<Vec<f64>>>()?;
    DiscreteModel::from_log_weights(p.atoms().to_vec(), &logs, p.radius())
}

/// Orthonormal basis (as rows) of the row space of `a`, by modified
/// Gram–Schmidt with re-orthogonalisation.
pub fn row_space_basis(a: &Matrix) -> Vec<Vector> {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut basis: Vec<Vector> = Vec::new();
    for i in 0..a.nrows() {
        let mut v: Vector = a.row(i).transpose();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let n = v.norm();
        if n > 1e-10 * scale {
            basis.push(v / n);
        }
    }
    basis
}

#[derive(Debug, Clone)]
pub struct GridProx {
    pub x: Vector,
    pub value: f64,
    /// Dimension of the searched coordinates.
    pub search_dim: usize,
}

/// Coarse points per axis by search dimension.
fn coarse_points(k: usize) -> usize {
    match k {
        0 | 1 => 801,
        2 => 201,
        _ => 41,
    }
}

/// Brute-force `argmax_{‖x‖ ≤ C} r(x) − λ‖x − y‖²`.
///
/// For rewards `f(Ax)` the search runs over coordinates `u` in the row
/// space of `A` (orthonormal basis from Gram–Schmidt); the orthogonal part of
/// `y` is kept and shrunk to the radius left over. Other rewards are
/// searched in all of `ℝᵈ`. A uniform grid on `[−C, C]ᵏ` (points outside the
/// ball projected onto it) is followed by zoom passes that halve the spacing
/// around the incumbent until it is at most `resolution`. Every pass keeps
/// the incumbent, so a finer resolution never lowers the value found.
pub fn oracle_prox_grid(
    reward: &RewardSpec,
    lambda: f64,
    y: &Vector,
    radius: f64,
    resolution: f64,
) -> Result<GridProx> {
    check_dim(reward.dim(), y.len())?;
    if !(resolution > 0.0 && radius > 0.0 && lambda > 0.0) {
        return Err(Error::invalid("resolution, radius and lambda must be positive"));
    }
    let d = y.len();
    let basis = match &reward.kind {
        RewardKind::LowRank { a, .. } => row_space_basis(a),
        _ => (0..d).map(|i| Vector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 })).collect(),
    };
    let k = basis.len();
    if k > 3 {
        return Err(Error::Capability(format!("grid prox oracle searches at most 3 dimensions, got {k}")));
    }
    let mut w_y = y.clone();
    for q in &basis {
        w_y.axpy(-q.dot(y), q, 1.0);
    }
    let lift = |u: &[f64]| -> Vector {
        let mut x = Vector::zeros(d);
        for (c, q) in u.iter().zip(&basis) {
            x.axpy(*c, q, 1.0);
        }
        let rho = (radius * radius - x.norm_squared()).max(0.0).sqrt();
        project_ball(&(x + project_ball(&w_y, rho)), radius)
    };
    let score = |u: &[f64]| -> Result<(f64, Vector)> {
        let mut uv = Vector::from_row_slice(u);
        if uv.norm() > radius {
            uv *= radius / uv.norm();
        }
        let x = lift(uv.as_slice());
        let v = reward.eval(&x)? - lambda * (&x - y).norm_squared();
        Ok((v, x))
    };
    let mut best = score(&vec![0.0; k])?;
    let mut best_u = vec![0.0; k];
    let consider = |u: Vec<f64>, best: &mut (f64, Vector), best_u: &mut Vec<f64>| -> Result<()> {
        let cand = score(&u)?;
        if cand.0 > best.0 {
            *best = cand;
            *best_u = u;
        }
        Ok(())
    };
    if k > 0 {
        let n = coarse_points(k);
        let mut step = 2.0 * radius / (n - 1) as f64;
        for_each_grid(k, n, |idx| {
            let u: Vec<f64> = idx.iter().map(|&i| -radius + i as f64 * step).collect();
            consider(u, &mut best, &mut best_u)
        })?;
        while step > resolution {
            step /= 2.0;
            let center = best_u.clone();
            for_each_grid(k, 9, |idx| {
                let u: Vec<f64> = idx.iter().zip(&center).map(|(&i, c)| c + (i as f64 - 4.0) * step).collect();
                consider(u, &mut best, &mut best_u)
            })?;
        }
    }
    Ok(GridProx { x: best.1, value: best.0, search_dim: k })
}

fn for_each_grid(k: usize, n: usize, mut visit: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let mut idx = vec![0usize; k];
    loop {
        visit(&idx)?;
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(());
            }
            idx[pos] += 1;
            if idx[pos] == n {
                idx[pos] = 0;
                pos += 1;
            } else {
                break;
            }
        }
    }
}
