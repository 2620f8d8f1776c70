use super::min_cost_assignment;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::model::DiscreteModel;

/// Largest support handled by the exact assignment solver.
pub const MAX_ASSIGNMENT: usize = 512;

/// Finitely supported law.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw {
    points: Vec<Vector>,
    weights: Vec<f64>,
}

impl EmpiricalLaw {
    pub fn uniform(points: Vec<Vector>) -> Result<Self> {
        let n = points.len();
        Self::weighted(points, vec![1.0 / n as f64; n])
    }

    pub fn weighted(points: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid("empirical law needs matching, nonempty points and weights"));
        }
        let d = points[0].len();
        for p in &points {
            check_dim(d, p.len())?;
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn from_discrete(model: &DiscreteModel) -> Self {
        Self { points: model.atoms().to_vec(), weights: model.probs().to_vec() }
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ π_i Q_i` over laws on a common space.
    pub fn mixture(weights: &[f64], parts: &[EmpiricalLaw]) -> Result<Self> {
        if weights.len() != parts.len() || parts.is_empty() {
            return Err(Error::invalid("mixture needs one weight per component"));
        }
        let mut points = Vec::new();
        let mut w = Vec::new();
        for (pi, q) in weights.iter().zip(parts) {
            for (x, wx) in q.points.iter().zip(&q.weights) {
                points.push(x.clone());
                w.push(pi * wx);
            }
        }
        Self::weighted(points, w)
    }
}

/// `½ Σ |a_i − b_i|`.
pub fn tv_weights(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn same_point(a: &Vector, b: &Vector) -> bool {
    a.len() == b.len() && (a - b).amax() <= 1e-12 * (1.0 + a.amax().max(b.amax()))
}

/// TV over the union of the two atom sets (missing atoms carry mass 0).
pub fn tv_discrete(p: &DiscreteModel, q: &DiscreteModel) -> f64 {
    let mut atoms: Vec<&Vector> = Vec::new();
    let mut mass: Vec<(f64, f64)> = Vec::new();
    for (which, model) in [(0, p), (1, q)] {
        for (x, w) in model.atoms().iter().zip(model.probs()) {
            let slot = match atoms.iter().position(|a| same_point(a, x)) {
                Some(i) => i,
                None => {
                    atoms.push(x);
                    mass.push((0.0, 0.0));
                    atoms.len() - 1
                }
            };
            if which == 0 {
                mass[slot].0 += w;
            } else {
                mass[slot].1 += w;
            }
        }
    }
    0.5 * mass.iter().map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// TV between `p` and the empirical law of `samples`, each sample assigned
/// to its nearest atom.
pub fn tv_to_samples(p: &DiscreteModel, samples: &[Vector]) -> f64 {
    let mut counts = vec![0usize; p.atoms().len()];
    for s in samples {
        counts[p.nearest_atom(s)] += 1;
    }
    let n = samples.len() as f64;
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    tv_weights(&freq, p.probs())
}

/// Exact `W_p` between weighted laws on the line, by merging the two
/// quantile functions.
pub fn wasserstein_1d(xs: &[f64], wx: &[f64], ys: &[f64], wy: &[f64], p: f64) -> f64 {
    let sorted = |v: &[f64], w: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        idx.into_iter().map(|i| (v[i], w[i])).collect::<Vec<_>>()
    };
    let a = sorted(xs, wx);
    let b = sorted(ys, wy);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut acc = 0.0;
    loop {
        let m = ra.min(rb);
        acc += m * (a[i].0 - b[j].0).abs().powf(p);
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra += a[i].1;
        }
        if rb <= 1e-15 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb += b[j].1;
        }
    }
    acc.max(0.0).powf(1.0 / p)
}

/// Common denominator `D ≤ 512` making both weight vectors multiples of `1/D`.
fn common_denominator(a: &[f64], b: &[f64]) -> Option<usize> {
    let lo = a.len().max(b.len()).min(MAX_ASSIGNMENT + 1);
    (lo..=MAX_ASSIGNMENT).find(|&d| {
        a.iter().chain(b).all(|w| {
            let s = w * d as f64;
            (s - s.round()).abs() <= 1e-9
        })
    })
}

fn expand(law: &EmpiricalLaw, d: usize) -> Vec<&Vector> {
    let mut out = Vec::with_capacity(d);
    for (x, w) in law.points.iter().zip(&law.weights) {
        for _ in 0..(w * d as f64).round() as usize {
            out.push(x);
        }
    }
    out
}

fn wp_empirical(a: &EmpiricalLaw, b: &EmpiricalLaw, p: f64) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    if a.dim() == 1 {
        let xs: Vec<f64> = a.points.iter().map(|v| v[0]).collect();
        let ys: Vec<f64> = b.points.iter().map(|v| v[0]).collect();
        return Ok(wasserstein_1d(&xs, &a.weights, &ys, &b.weights, p));
    }
    let d = common_denominator(&a.weights, &b.weights).ok_or_else(|| {
        Error::Capability(format!(
            "exact W{p} in dimension {} needs weights on a common grid of at most {MAX_ASSIGNMENT} atoms; subsample",
            a.dim()
        ))
    })?;
    let ea = expand(a, d);
    let eb = expand(b, d);
    if ea.len() != d || eb.len() != d {
        return Err(Error::Numerical("weight expansion lost mass".into()));
    }
    let cost: Vec<Vec<f64>> = ea.iter().map(|x| eb.iter().map(|y| (*x - *y).norm().powf(p)).collect()).collect();
    let (_, total) = min_cost_assignment(&cost);
    Ok((total / d as f64).max(0.0).powf(1.0 / p))
}

/// Exact `W₁`; in dimension above one only for supports of at most 512 atoms.
pub fn w1_empirical(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    wp_empirical(a, b, 1.0)
}

/// Exact `W₂`; in dimension above one only for supports of at most 512 atoms.
pub fn w2_empirical(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    wp_empirical(a, b, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> EmpiricalLaw {
        EmpiricalLaw::uniform(xs.iter().map(|x| Vector::from_vec(vec![*x])).collect()).unwrap()
    }

    fn atoms(xs: &[f64], ps: &[f64]) -> DiscreteModel {
        DiscreteModel::new(xs.iter().map(|x| Vector::from_vec(vec![*x])).collect(), ps.to_vec(), 10.0).unwrap()
    }

    #[test]
    fn tv_examples() {
        let p = atoms(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(tv_discrete(&p, &p), 0.0);
        assert_eq!(tv_discrete(&atoms(&[0.0], &[1.0]), &atoms(&[1.0], &[1.0])), 1.0);
        let e = 1f64.exp();
        let q = atoms(&[0.0, 1.0], &[1.0 / (1.0 + e * e), e * e / (1.0 + e * e)]);
        assert!((tv_discrete(&p, &q) - 0.3808).abs() < 1e-4);
    }

    #[test]
    fn w2_examples() {
        assert_eq!(w2_empirical(&line(&[0.0, 1.0]), &line(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((w2_empirical(&line(&[0.0, 1.0]), &line(&[1.0, 2.0])).unwrap() - 1.0).abs() < 1e-15);
        let a = line(&[0.0, 1.0, 5.0]);
        let b = EmpiricalLaw::weighted(vec![Vector::from_vec(vec![2.0])], vec![1.0]).unwrap();
        let exact = ((4.0 + 1.0 + 9.0) / 3.0f64).sqrt();
        assert!((w2_empirical(&a, &b).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn planar_assignment_agrees_with_line() {
        let pts =
            |xs: &[f64]| EmpiricalLaw::uniform(xs.iter().map(|x| Vector::from_vec(vec![*x, 0.0])).collect()).unwrap();
        let a = [0.3, -1.0, 2.0, 0.7];
        let b = [1.0, 1.5, -0.2, 0.0];
        let w_plane = w2_empirical(&pts(&a), &pts(&b)).unwrap();
        let w_line = w2_empirical(&line(&a), &line(&b)).unwrap();
        assert!((w_plane - w_line).abs() < 1e-12);
    }

    #[test]
    fn refuses_large_supports() {
        let pts: Vec<Vector> = (0..600).map(|i| Vector::from_vec(vec![i as f64, 0.0])).collect();
        let a = EmpiricalLaw::uniform(pts.clone()).unwrap();
        assert!(matches!(w2_empirical(&a, &a), Err(Error::Capability(_))));
    }
}
