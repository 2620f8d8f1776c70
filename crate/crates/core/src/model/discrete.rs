use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::gmm::weighted_score;
use super::NoiseLevel;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{log_sum_exp, softmax, Vector};
use crate::rng::SimRng;

/// Finitely supported law on atoms inside `B(C)`.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    atoms: Vec<Vector>,
    probs: Vec<f64>,
    radius: f64,
    sampler: WeightedIndex<f64>,
}

impl DiscreteModel {
    pub fn new(atoms: Vec<Vector>, probs: Vec<f64>, radius: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("discrete model needs at least one atom"));
        }
        if atoms.len() != probs.len() {
            return Err(Error::invalid(format!("{} atoms but {} probabilities", atoms.len(), probs.len())));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("support radius must be positive, got {radius}")));
        }
        let d = atoms[0].len();
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        for a in &atoms {
            check_dim(d, a.len())?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("atoms must be finite"));
            }
            if a.norm() > radius * (1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "atom with norm {} lies outside the ball of radius {radius}",
                    a.norm()
                )));
            }
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        let sampler = WeightedIndex::new(&probs).map_err(|e| Error::invalid(format!("probabilities: {e}")))?;
        Ok(Self { atoms, probs, radius, sampler })
    }

    /// Uniform law over `atoms`.
    pub fn uniform(atoms: Vec<Vector>, radius: f64) -> Result<Self> {
        let n = atoms.len().max(1);
        Self::new(atoms, vec![1.0 / n as f64; n], radius)
    }

    /// Law with probabilities `∝ exp(log_weights)`, normalised stably.
    pub fn from_log_weights(atoms: Vec<Vector>, log_weights: &[f64], radius: f64) -> Result<Self> {
        if log_sum_exp(log_weights).is_nan() || log_weights.iter().all(|l| *l == f64::NEG_INFINITY) {
            return Err(Error::Numerical("log-weights carry no mass".into()));
        }
        Self::new(atoms, softmax(log_weights), radius)
    }

    pub fn atoms(&self) -> &[Vector] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn sample(&self, rng: &mut SimRng) -> Vector {
        self.atoms[self.sampler.sample(rng)].clone()
    }

    pub fn sample_index(&self, rng: &mut SimRng) -> usize {
        self.sampler.sample(rng)
    }

    fn noised_terms(&self, sigma: NoiseLevel, x: &Vector) -> (Vec<f64>, Vec<Vector>) {
        let a = sigma.signal_scale();
        let s2 = sigma.value().powi(2);
        let d = self.dim() as f64;
        let norm_const = -0.5 * d * (2.0 * std::f64::consts::PI * s2).ln();
        self.atoms
            .iter()
            .zip(&self.probs)
            .map(|(atom, p)| {
                let diff = atom * a - x;
                (p.ln() - diff.norm_squared() / (2.0 * s2) + norm_const, diff / s2)
            })
            .unzip()
    }

    /// Score of the atom-convolved Gaussian mixture `Σ p_i N(a x_i, σ²I)`.
    pub fn noised_score(&self, sigma: NoiseLevel, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        let (logs, grads) = self.noised_terms(sigma, x);
        weighted_score(&logs, &grads, self.dim())
    }

    pub fn noised_log_density(&self, sigma: NoiseLevel, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(log_sum_exp(&self.noised_terms(sigma, x).0))
    }

    /// Probabilities reweighted by `exp(<v, x_i>)`.
    pub fn tilt(&self, v: &Vector) -> Result<Self> {
        check_dim(self.dim(), v.len())?;
        let logs: Vec<f64> = self.atoms.iter().zip(&self.probs).map(|(a, p)| p.ln() + v.dot(a)).collect();
        Self::from_log_weights(self.atoms.clone(), &logs, self.radius)
    }

    pub fn log_normalizer(&self, v: &Vector) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        let logs: Vec<f64> = self.atoms.iter().zip(&self.probs).map(|(a, p)| p.ln() + v.dot(a)).collect();
        Ok(log_sum_exp(&logs))
    }

    /// Index of the atom nearest to `x` (first on ties).
    pub fn nearest_atom(&self, x: &Vector) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, a) in self.atoms.iter().enumerate() {
            let d = (a - x).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm_one() -> DiscreteModel {
        DiscreteModel::uniform(vec![Vector::from_vec(vec![-1.0]), Vector::from_vec(vec![1.0])], 1.0).unwrap()
    }

    #[test]
    fn single_atom_score_is_gaussian() {
        let m = DiscreteModel::new(vec![Vector::zeros(2)], vec![1.0], 1.0).unwrap();
        let s = NoiseLevel::new(0.3).unwrap();
        let x = Vector::from_vec(vec![0.4, -0.2]);
        let g = m.noised_score(s, &x).unwrap();
        let expected = -&x / 0.09;
        assert!((g - expected).norm() < 1e-12);
    }

    #[test]
    fn tilt_of_symmetric_pair() {
        let t = pm_one().tilt(&Vector::from_vec(vec![1.0])).unwrap();
        let e = std::f64::consts::E;
        assert!((t.probs()[0] - e.recip() / (e + e.recip())).abs() < 1e-15);
        assert!((t.probs()[1] - 0.8807970779778823).abs() < 1e-12);
        let z = pm_one().log_normalizer(&Vector::from_vec(vec![1.0])).unwrap().exp();
        assert!((z - 1f64.cosh()).abs() < 1e-14);
    }

    #[test]
    fn rejects_atoms_outside_ball() {
        assert!(DiscreteModel::uniform(vec![Vector::from_vec(vec![2.0])], 1.0).is_err());
        assert!(DiscreteModel::new(vec![Vector::zeros(1)], vec![0.5], 1.0).is_err());
    }

    #[test]
    fn far_query_does_not_overflow() {
        let s = NoiseLevel::new(0.01).unwrap();
        let g = pm_one().noised_score(s, &Vector::from_vec(vec![50.0])).unwrap();
        assert!(g[0].is_finite() && g[0] < 0.0);
    }
}
