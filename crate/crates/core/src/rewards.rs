//! Reward functions `r : ℝᵈ → ℝ` and the low-dimensional functions `f` they
//! are built from, with value and first-order oracles.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{log_sum_exp, matrix_from_rows, operator_norm, softmax, sym_eigen, Matrix, Vector};

/// Relative slack on the declared domain ball inside which oracles answer.
pub const DOMAIN_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Affine,
    Convex,
    Concave,
    Unknown,
}

impl Curvature {
    pub fn is_convex(self) -> bool {
        matches!(self, Curvature::Affine | Curvature::Convex)
    }

    pub fn is_concave(self) -> bool {
        matches!(self, Curvature::Affine | Curvature::Concave)
    }
}

pub type ValueFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

#[derive(Clone)]
pub enum LowDimKind {
    /// `max_i <s_i, u> + c_i`
    MaxAffine {
        slopes: Vec<Vector>,
        offsets: Vec<f64>,
    },
    /// `min_i <s_i, u> + c_i`
    MinAffine {
        slopes: Vec<Vector>,
        offsets: Vec<f64>,
    },
    /// `log Σ_i exp(β_i + <z_i, u>)` with `β_i = log w_i`
    LogSumExp {
        log_weights: Vec<f64>,
        slopes: Vec<Vector>,
    },
    /// `uᵀQu + <q, u> + c` with `Q` symmetric
    Quadratic {
        q: Matrix,
        lin: Vector,
        c: f64,
    },
    Custom {
        value: ValueFn,
        grad: Option<GradFn>,
    },
}

impl fmt::Debug for LowDimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LowDimKind::MaxAffine { slopes, .. } => write!(f, "MaxAffine({} pieces)", slopes.len()),
            LowDimKind::MinAffine { slopes, .. } => write!(f, "MinAffine({} pieces)", slopes.len()),
            LowDimKind::LogSumExp { slopes, .. } => write!(f, "LogSumExp({} terms)", slopes.len()),
            LowDimKind::Quadratic { q, .. } => write!(f, "Quadratic({}x{})", q.nrows(), q.ncols()),
            LowDimKind::Custom { grad, .. } => write!(f, "Custom(gradient: {})", grad.is_some()),
        }
    }
}

/// A function on `ℝᵏ` with a value oracle, an optional subgradient oracle,
/// a curvature flag and a declared Lipschitz constant on `B(R)`.
#[derive(Debug, Clone)]
pub struct LowDimFunction {
    kind: LowDimKind,
    dim: usize,
    curvature: Curvature,
    lipschitz: Option<f64>,
    radius: Option<f64>,
}

fn check_pieces(slopes: &[Vector], offsets: &[f64]) -> Result<usize> {
    if slopes.is_empty() {
        return Err(Error::invalid("piecewise function needs at least one piece"));
    }
    if slopes.len() != offsets.len() {
        return Err(Error::invalid("slope and offset counts differ"));
    }
    let k = slopes[0].len();
    if k == 0 {
        return Err(Error::invalid("slopes must have dimension at least 1"));
    }
    for s in slopes {
        check_dim(k, s.len())?;
    }
    if slopes.iter().flat_map(|s| s.iter()).chain(offsets).any(|v| !v.is_finite()) {
        return Err(Error::invalid("piece parameters must be finite"));
    }
    Ok(k)
}

fn max_norm(slopes: &[Vector]) -> f64 {
    slopes.iter().map(|s| s.norm()).fold(0.0, f64::max)
}

impl LowDimFunction {
    /// `f(u) = max_i <s_i, u> + c_i`; convex with `L = max_i ‖s_i‖`.
    pub fn max_affine(pieces: Vec<(Vector, f64)>) -> Result<Self> {
        let (slopes, offsets): (Vec<_>, Vec<_>) = pieces.into_iter().unzip();
        let dim = check_pieces(&slopes, &offsets)?;
        let l = max_norm(&slopes);
        let curvature = if slopes.len() == 1 { Curvature::Affine } else { Curvature::Convex };
        Ok(Self { kind: LowDimKind::MaxAffine { slopes, offsets }, dim, curvature, lipschitz: Some(l), radius: None })
    }

    /// `f(u) = min_i <s_i, u> + c_i`; concave.
    pub fn min_affine(pieces: Vec<(Vector, f64)>) -> Result<Self> {
        let (slopes, offsets): (Vec<_>, Vec<_>) = pieces.into_iter().unzip();
        let dim = check_pieces(&slopes, &offsets)?;
        let l = max_norm(&slopes);
        let curvature = if slopes.len() == 1 { Curvature::Affine } else { Curvature::Concave };
        Ok(Self { kind: LowDimKind::MinAffine { slopes, offsets }, dim, curvature, lipschitz: Some(l), radius: None })
    }

    /// `f(u) = log Σ w_i exp(<z_i, u>)` with all `w_i > 0`.
    pub fn log_sum_exp(weights: &[f64], slopes: Vec<Vector>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("log-sum-exp weights must be positive and finite"));
        }
        let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        Self::log_sum_exp_from_logs(log_weights, slopes)
    }

    pub fn log_sum_exp_from_logs(log_weights: Vec<f64>, slopes: Vec<Vector>) -> Result<Self> {
        let dim = check_pieces(&slopes, &log_weights)?;
        let l = max_norm(&slopes);
        let curvature = if slopes.len() == 1 { Curvature::Affine } else { Curvature::Convex };
        Ok(Self {
            kind: LowDimKind::LogSumExp { log_weights, slopes },
            dim,
            curvature,
            lipschitz: Some(l),
            radius: None,
        })
    }

    /// `f(u) = uᵀQu + <q, u> + c`; curvature read off the spectrum of `Q`.
    pub fn quadratic(q: Matrix, lin: Vector, c: f64) -> Result<Self> {
        let dim = lin.len();
        if dim == 0 || q.nrows() != dim || q.ncols() != dim {
            return Err(Error::invalid("quadratic form dimensions disagree"));
        }
        if !crate::linalg::is_symmetric(&q, 1e-12) {
            return Err(Error::invalid("quadratic form must be symmetric"));
        }
        if q.iter().chain(lin.iter()).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::invalid("quadratic parameters must be finite"));
        }
        let (vals, _) = sym_eigen(&q);
        let tol = 1e-12 * q.amax().max(1.0);
        let curvature = if vals.iter().all(|v| v.abs() <= tol) {
            Curvature::Affine
        } else if vals.min() >= -tol {
            Curvature::Convex
        } else if vals.max() <= tol {
            Curvature::Concave
        } else {
            Curvature::Unknown
        };
        Ok(Self { kind: LowDimKind::Quadratic { q, lin, c }, dim, curvature, lipschitz: None, radius: None })
    }

    pub fn custom(dim: usize, curvature: Curvature, value: ValueFn, grad: Option<GradFn>) -> Self {
        Self { kind: LowDimKind::Custom { value, grad }, dim, curvature, lipschitz: None, radius: None }
    }

    /// Declares the Lipschitz constant valid on the domain ball.
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    /// Declares the radius `R` of the ball `B(R)` the oracles serve.
    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = Some(r);
        self
    }

    pub fn kind(&self) -> &LowDimKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    /// Declared (or structurally known) Lipschitz constant. For quadratics
    /// without a declaration the constant on the declared ball is derived.
    pub fn lipschitz(&self) -> Option<f64> {
        if self.lipschitz.is_some() {
            return self.lipschitz;
        }
        match (&self.kind, self.radius) {
            (LowDimKind::Quadratic { q, lin, .. }, Some(r)) => Some(2.0 * operator_norm(q) * r + lin.norm()),
            _ => None,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn has_subgradient(&self) -> bool {
        !matches!(self.kind, LowDimKind::Custom { grad: None, .. })
    }

    pub fn value(&self, u: &Vector) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        Ok(self.value_unchecked(u))
    }

    pub(crate) fn value_unchecked(&self, u: &Vector) -> f64 {
        match &self.kind {
            LowDimKind::MaxAffine { slopes, offsets } => {
                slopes.iter().zip(offsets).map(|(s, c)| s.dot(u) + c).fold(f64::NEG_INFINITY, f64::max)
            }
            LowDimKind::MinAffine { slopes, offsets } => {
                slopes.iter().zip(offsets).map(|(s, c)| s.dot(u) + c).fold(f64::INFINITY, f64::min)
            }
            LowDimKind::LogSumExp { log_weights, slopes } => {
                let a: Vec<f64> = slopes.iter().zip(log_weights).map(|(z, b)| z.dot(u) + b).collect();
                log_sum_exp(&a)
            }
            LowDimKind::Quadratic { q, lin, c } => u.dot(&(q * u)) + lin.dot(u) + c,
            LowDimKind::Custom { value, .. } => value(u),
        }
    }

    /// Value and a (sub/super)gradient at `u`.
    ///
    /// At kinks of piecewise-affine functions the minimum-norm element of the
    /// hull of active slopes is returned. Queries outside `B(R(1 + 10⁻³))`
    /// are rejected when a radius is declared.
    pub fn first_order(&self, u: &Vector) -> Result<(f64, Vector)> {
        check_dim(self.dim, u.len())?;
        if let Some(r) = self.radius {
            if u.norm() > r * (1.0 + DOMAIN_SLACK) + 1e-12 {
                return Err(Error::Precondition(format!(
                    "query with norm {} outside the oracle domain of radius {r}",
                    u.norm()
                )));
            }
        }
        let value = self.value_unchecked(u);
        let g = match &self.kind {
            LowDimKind::MaxAffine { slopes, offsets } | LowDimKind::MinAffine { slopes, offsets } => {
                let tol = 1e-12 * value.abs().max(1.0);
                let active: Vec<&Vector> = slopes
                    .iter()
                    .zip(offsets)
                    .filter(|(s, c)| (s.dot(u) + *c - value).abs() <= tol)
                    .map(|(s, _)| s)
                    .collect();
                min_norm_in_hull(&active)
            }
            LowDimKind::LogSumExp { log_weights, slopes } => {
                let a: Vec<f64> = slopes.iter().zip(log_weights).map(|(z, b)| z.dot(u) + b).collect();
                let w = softmax(&a);
                let mut g = Vector::zeros(self.dim);
                for (wi, z) in w.iter().zip(slopes) {
                    g.axpy(*wi, z, 1.0);
                }
                g
            }
            LowDimKind::Quadratic { q, lin, .. } => q * u * 2.0 + lin,
            LowDimKind::Custom { grad: Some(grad), .. } => grad(u),
            LowDimKind::Custom { grad: None, .. } => {
                return Err(Error::Precondition("function has no subgradient oracle".into()))
            }
        };
        check_dim(self.dim, g.len())?;
        if let Some(l) = self.lipschitz {
            if self.curvature.is_convex() && g.norm() > l * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::LipschitzViolation(format!(
                    "subgradient norm {} exceeds declared L = {l}",
                    g.norm()
                )));
            }
        }
        Ok((value, g))
    }
}

/// Minimum-norm point of the convex hull of `points`.
///
/// Small active sets are solved exactly by enumerating affinely independent
/// faces; larger ones fall back to Frank–Wolfe.
pub fn min_norm_in_hull(points: &[&Vector]) -> Vector {
    assert!(!points.is_empty());
    if points.len() == 1 {
        return points[0].clone();
    }
    let n = points.len();
    if n <= 10 {
        let mut best: Option<Vector> = None;
        for mask in 1u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            if let Some(p) = affine_min_norm(points, &idx) {
                if best.as_ref().is_none_or(|b| p.norm() < b.norm()) {
                    best = Some(p);
                }
            }
        }
        return best.expect("singletons are always feasible");
    }
    let mut x = points[0].clone();
    for t in 0..10_000 {
        let (j, _) =
            points
                .iter()
                .map(|p| p.dot(&x))
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let dir = points[j] - &x;
        let denom = dir.norm_squared();
        if denom == 0.0 {
            break;
        }
        let step = (-(x.dot(&dir)) / denom).clamp(0.0, 1.0);
        if step == 0.0 && t > 0 {
            break;
        }
        x += dir * step;
    }
    x
}

fn affine_min_norm(points: &[&Vector], idx: &[usize]) -> Option<Vector> {
    let p0 = points[idx[0]];
    if idx.len() == 1 {
        return Some(p0.clone());
    }
    let k = p0.len();
    let diffs = Matrix::from_fn(k, idx.len() - 1, |r, c| points[idx[c + 1]][r] - p0[r]);
    let gram = diffs.tr_mul(&diffs);
    let rhs = -diffs.tr_mul(p0);
    let mu = gram.clone().lu().solve(&rhs)?;
    if (&gram * &mu - &rhs).norm() > 1e-9 * rhs.norm().max(1.0) {
        return None;
    }
    let lead = 1.0 - mu.sum();
    if lead < -1e-12 || mu.iter().any(|m| *m < -1e-12) {
        return None;
    }
    Some(p0 + diffs * mu)
}

/// Reward `r(x)` on `ℝᵈ`.
#[derive(Debug, Clone)]
pub enum RewardKind {
    /// `<θ, x>`
    Linear { theta: Vector },
    /// `−xᵀBx + <b, x> + c`; concave when `B ⪰ 0`.
    Quadratic { b_mat: Matrix, b: Vector, c: f64 },
    /// `f(Ax)` with `A ∈ ℝ^{k×d}`.
    LowRank { a: Matrix, f: LowDimFunction },
}

#[derive(Debug, Clone)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub lipschitz_hint: Option<f64>,
}

impl RewardSpec {
    pub fn linear(theta: Vector) -> Self {
        Self { kind: RewardKind::Linear { theta }, lipschitz_hint: None }
    }

    pub fn quadratic(b_mat: Matrix, b: Vector, c: f64) -> Result<Self> {
        let d = b.len();
        if d == 0 || b_mat.nrows() != d || b_mat.ncols() != d {
            return Err(Error::invalid("quadratic reward dimensions disagree"));
        }
        if !crate::linalg::is_symmetric(&b_mat, 1e-12) {
            return Err(Error::invalid("quadratic reward matrix must be symmetric"));
        }
        if b_mat.iter().chain(b.iter()).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::invalid("quadratic reward parameters must be finite"));
        }
        Ok(Self { kind: RewardKind::Quadratic { b_mat, b, c }, lipschitz_hint: None })
    }

    pub fn low_rank(a: Matrix, f: LowDimFunction) -> Result<Self> {
        if a.nrows() != f.dim() {
            return Err(Error::DimensionMismatch { expected: f.dim(), got: a.nrows() });
        }
        if a.ncols() == 0 || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection matrix must be finite with at least one column"));
        }
        Ok(Self { kind: RewardKind::LowRank { a, f }, lipschitz_hint: None })
    }

    /// `log Σ w_i exp(<z_i, Ax>)`.
    pub fn log_sum_exp(weights: &[f64], slopes: Vec<Vector>, a: Matrix) -> Result<Self> {
        Self::low_rank(a, LowDimFunction::log_sum_exp(weights, slopes)?)
    }

    pub fn with_lipschitz_hint(mut self, l: f64) -> Self {
        self.lipschitz_hint = Some(l);
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            RewardKind::Linear { theta } => theta.len(),
            RewardKind::Quadratic { b, .. } => b.len(),
            RewardKind::LowRank { a, .. } => a.ncols(),
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &Vector) -> f64 {
        match &self.kind {
            RewardKind::Linear { theta } => theta.dot(x),
            RewardKind::Quadratic { b_mat, b, c } => -x.dot(&(b_mat * x)) + b.dot(x) + c,
            RewardKind::LowRank { a, f } => f.value_unchecked(&(a * x)),
        }
    }

    /// A (sub/super)gradient of `r` at `x`.
    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        match &self.kind {
            RewardKind::Linear { theta } => Ok(theta.clone()),
            RewardKind::Quadratic { b_mat, b, .. } => Ok(b - b_mat * x * 2.0),
            RewardKind::LowRank { a, f } => {
                let (_, g) = f.first_order(&(a * x))?;
                Ok(a.tr_mul(&g))
            }
        }
    }

    pub fn curvature(&self) -> Curvature {
        match &self.kind {
            RewardKind::Linear { .. } => Curvature::Affine,
            RewardKind::Quadratic { b_mat, .. } => {
                let (vals, _) = sym_eigen(b_mat);
                let tol = 1e-12 * b_mat.amax().max(1.0);
                if vals.iter().all(|v| v.abs() <= tol) {
                    Curvature::Affine
                } else if vals.min() >= -tol {
                    Curvature::Concave
                } else if vals.max() <= tol {
                    Curvature::Convex
                } else {
                    Curvature::Unknown
                }
            }
            RewardKind::LowRank { f, .. } => f.curvature(),
        }
    }

    /// The reward written as `f(Ax)`.
    pub fn low_rank_view(&self) -> Result<(Matrix, LowDimFunction)> {
        match &self.kind {
            RewardKind::Linear { theta } => {
                let a = Matrix::from_row_slice(1, theta.len(), theta.as_slice());
                Ok((a, LowDimFunction::max_affine(vec![(Vector::from_element(1, 1.0), 0.0)])?))
            }
            RewardKind::Quadratic { b_mat, b, c } => {
                let d = b.len();
                Ok((Matrix::identity(d, d), LowDimFunction::quadratic(-b_mat, b.clone(), *c)?))
            }
            RewardKind::LowRank { a, f } => Ok((a.clone(), f.clone())),
        }
    }

    /// Lipschitz constant of `r` on `B(C)`: the hint if given, else derived
    /// from the structure.
    pub fn lipschitz(&self, radius: f64) -> Option<f64> {
        if self.lipschitz_hint.is_some() {
            return self.lipschitz_hint;
        }
        match &self.kind {
            RewardKind::Linear { theta } => Some(theta.norm()),
            RewardKind::Quadratic { b_mat, b, .. } => Some(2.0 * operator_norm(b_mat) * radius + b.norm()),
            RewardKind::LowRank { a, f } => f.lipschitz().map(|l| l * operator_norm(a)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: RewardJson = serde_json::from_str(text)?;
        spec.build()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceJson {
    pub slope: Vec<f64>,
    pub offset: f64,
}

/// JSON form of a reward.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardJson {
    Linear {
        theta: Vec<f64>,
        #[serde(rename = "L", default)]
        lipschitz: Option<f64>,
    },
    Quadratic {
        #[serde(rename = "B")]
        b_mat: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
        #[serde(rename = "L", default)]
        lipschitz: Option<f64>,
    },
    LowrankMaxaffine {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        pieces: Vec<PieceJson>,
        #[serde(rename = "L", default)]
        lipschitz: Option<f64>,
        #[serde(rename = "R", default)]
        radius: Option<f64>,
    },
    LowrankMinaffine {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        pieces: Vec<PieceJson>,
        #[serde(rename = "L", default)]
        lipschitz: Option<f64>,
        #[serde(rename = "R", default)]
        radius: Option<f64>,
    },
    Logsumexp {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        weights: Vec<f64>,
        slopes: Vec<Vec<f64>>,
        #[serde(rename = "L", default)]
        lipschitz: Option<f64>,
        #[serde(rename = "R", default)]
        radius: Option<f64>,
    },
    LowrankQuadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        q_lin: Vec<f64>,
        #[serde(default)]
        c: f64,
        #[serde(rename = "L", default)]
        lipschitz: Option<f64>,
        #[serde(rename = "R", default)]
        radius: Option<f64>,
    },
}

fn parse_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    if rows.is_empty() {
        return Err(Error::invalid(format!("{what} has no rows")));
    }
    matrix_from_rows(rows).ok_or_else(|| Error::invalid(format!("{what} is ragged")))
}

fn parse_pieces(pieces: &[PieceJson]) -> Vec<(Vector, f64)> {
    pieces.iter().map(|p| (Vector::from_vec(p.slope.clone()), p.offset)).collect()
}

fn decorate(mut f: LowDimFunction, l: Option<f64>, r: Option<f64>) -> Result<LowDimFunction> {
    if let Some(l) = l {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::invalid("L must be finite and nonnegative"));
        }
        f = f.with_lipschitz(l);
    }
    if let Some(r) = r {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid("R must be finite and nonnegative"));
        }
        f = f.with_radius(r);
    }
    Ok(f)
}

impl RewardJson {
    pub fn build(&self) -> Result<RewardSpec> {
        let spec = match self {
            RewardJson::Linear { theta, lipschitz } => {
                if theta.is_empty() || theta.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("theta must be a nonempty finite vector"));
                }
                let mut r = RewardSpec::linear(Vector::from_vec(theta.clone()));
                r.lipschitz_hint = *lipschitz;
                r
            }
            RewardJson::Quadratic { b_mat, b, c, lipschitz } => {
                let mut r = RewardSpec::quadratic(parse_matrix(b_mat, "B")?, Vector::from_vec(b.clone()), *c)?;
                r.lipschitz_hint = *lipschitz;
                r
            }
            RewardJson::LowrankMaxaffine { a, pieces, lipschitz, radius } => {
                let f = decorate(LowDimFunction::max_affine(parse_pieces(pieces))?, *lipschitz, *radius)?;
                RewardSpec::low_rank(parse_matrix(a, "A")?, f)?
            }
            RewardJson::LowrankMinaffine { a, pieces, lipschitz, radius } => {
                let f = decorate(LowDimFunction::min_affine(parse_pieces(pieces))?, *lipschitz, *radius)?;
                RewardSpec::low_rank(parse_matrix(a, "A")?, f)?
            }
            RewardJson::Logsumexp { a, weights, slopes, lipschitz, radius } => {
                let f =
                    LowDimFunction::log_sum_exp(weights, slopes.iter().map(|s| Vector::from_vec(s.clone())).collect())?;
                RewardSpec::low_rank(parse_matrix(a, "A")?, decorate(f, *lipschitz, *radius)?)?
            }
            RewardJson::LowrankQuadratic { a, q, q_lin, c, lipschitz, radius } => {
                let f = LowDimFunction::quadratic(parse_matrix(q, "Q")?, Vector::from_vec(q_lin.clone()), *c)?;
                RewardSpec::low_rank(parse_matrix(a, "A")?, decorate(f, *lipschitz, *radius)?)?
            }
        };
        Ok(spec)
    }
}

/// Random max-affine function in `ℝᵏ` with slopes of norm at most `max_slope`.
pub fn random_max_affine<R: rand::Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    pieces: usize,
    max_slope: f64,
) -> LowDimFunction {
    let pieces = (0..pieces.max(1))
        .map(|_| {
            let dir = Vector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            let scale = max_slope * rng.random::<f64>() / dir.norm().max(1.0);
            (dir * scale, rng.random_range(-1.0..1.0))
        })
        .collect();
    LowDimFunction::max_affine(pieces).expect("well-formed pieces")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    fn abs1() -> LowDimFunction {
        LowDimFunction::max_affine(vec![(v(&[1.0]), 0.0), (v(&[-1.0]), 0.0)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(RewardSpec::linear(v(&[1.0, 2.0])).eval(&v(&[3.0, 4.0])).unwrap(), 11.0);
        let fig1 = RewardSpec::quadratic(Matrix::from_element(1, 1, 0.15), v(&[0.6]), -0.6).unwrap();
        assert!(fig1.eval(&v(&[2.0])).unwrap().abs() < 1e-15);
        let lse = RewardSpec::log_sum_exp(&[1.0, 1.0], vec![v(&[1.0]), v(&[-1.0])], Matrix::identity(1, 1)).unwrap();
        assert!((lse.eval(&v(&[0.0])).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(RewardSpec::linear(v(&[1.0])).eval(&v(&[1.0, 2.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn first_order_examples() {
        let f = abs1();
        assert_eq!(f.first_order(&v(&[0.5])).unwrap(), (0.5, v(&[1.0])));
        let (val, g) = f.first_order(&v(&[0.0])).unwrap();
        assert_eq!(val, 0.0);
        assert!(g.norm() < 1e-15);
        let half = LowDimFunction::quadratic(Matrix::identity(2, 2) * 0.5, Vector::zeros(2), 0.0).unwrap();
        let (val, g) = half.first_order(&v(&[1.0, 1.0])).unwrap();
        assert_eq!(val, 1.0);
        assert!((g - v(&[1.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn domain_is_enforced() {
        let f = abs1().with_radius(1.0);
        assert!(f.first_order(&v(&[1.0005])).is_ok());
        assert!(matches!(f.first_order(&v(&[1.01])), Err(Error::Precondition(_))));
    }

    #[test]
    fn lipschitz_violation_is_detected() {
        let f = abs1().with_lipschitz(0.5);
        assert!(matches!(f.first_order(&v(&[0.3])), Err(Error::LipschitzViolation(_))));
    }

    #[test]
    fn max_affine_basic_shapes() {
        assert!(LowDimFunction::max_affine(vec![]).is_err());
        let aff = LowDimFunction::max_affine(vec![(v(&[2.0, -1.0]), 0.3)]).unwrap();
        assert_eq!(aff.curvature(), Curvature::Affine);
        for u in [v(&[0.1, 0.2]), v(&[-3.0, 1.0])] {
            assert_eq!(aff.first_order(&u).unwrap().1, v(&[2.0, -1.0]));
        }
    }

    #[test]
    fn random_max_affine_is_midpoint_convex() {
        let mut rng = rng_from_seed(7);
        let f = random_max_affine(&mut rng, 2, 3, 2.0);
        for _ in 0..1000 {
            let a = v(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            let b = v(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            let mid = (&a + &b) * 0.5;
            let lhs = f.value(&mid).unwrap();
            let rhs = 0.5 * (f.value(&a).unwrap() + f.value(&b).unwrap());
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn hull_min_norm() {
        let a = v(&[1.0, 1.0]);
        let b = v(&[1.0, -1.0]);
        assert!((min_norm_in_hull(&[&a, &b]) - v(&[1.0, 0.0])).norm() < 1e-12);
        let c = v(&[-1.0, 0.0]);
        assert!(min_norm_in_hull(&[&a, &b, &c]).norm() < 1e-12);
    }

    #[test]
    fn reward_json_variants() {
        let r = RewardSpec::from_json(
            r#"{"type":"lowrank_maxaffine","A":[[1,0]],"pieces":[{"slope":[1],"offset":0},{"slope":[-1],"offset":0}],"L":1,"R":1}"#,
        )
        .unwrap();
        assert_eq!(r.dim(), 2);
        assert_eq!(r.curvature(), Curvature::Convex);
        let q = RewardSpec::from_json(r#"{"type":"quadratic","B":[[0.15]],"b":[0.6],"c":-0.6}"#).unwrap();
        assert_eq!(q.curvature(), Curvature::Concave);
        assert!(RewardSpec::from_json(r#"{"type":"quadratic","B":[[1,2]],"b":[0.6]}"#).is_err());
        assert!(RewardSpec::from_json(r#"{"type":"logsumexp","A":[[1]],"weights":[0],"slopes":[[1]]}"#).is_err());
    }
}
