use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::NoiseLevel;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{is_symmetric, log_sum_exp, sym_eigen, Matrix, Vector};
use crate::rng::SimRng;

/// Untruncated out-of-ball mass a mixture may carry and still count as
/// supported on its ball.
pub const MAX_TAIL_MASS: f64 = 1e-10;

/// Consecutive out-of-ball draws tolerated before the sampler gives up.
pub const MAX_REJECTIONS: usize = 1_000_000;

/// Finite Gaussian mixture with cached eigendecompositions of the
/// component covariances.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    means: Vec<Vector>,
    covs: Vec<Matrix>,
    eig_vals: Vec<Vector>,
    eig_vecs: Vec<Matrix>,
    sampler: WeightedIndex<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vector>, covs: Vec<Matrix>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if means.len() != weights.len() || covs.len() != weights.len() {
            return Err(Error::invalid(format!(
                "mixture has {} weights, {} means and {} covariances",
                weights.len(),
                means.len(),
                covs.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("mixture weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let mut eig_vals = Vec::with_capacity(covs.len());
        let mut eig_vecs = Vec::with_capacity(covs.len());
        for (mu, cov) in means.iter().zip(&covs) {
            check_dim(d, mu.len())?;
            if cov.nrows() != d || cov.ncols() != d {
                return Err(Error::invalid(format!("covariance is {}x{}, expected {d}x{d}", cov.nrows(), cov.ncols())));
            }
            if mu.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid("mixture parameters must be finite"));
            }
            if !is_symmetric(cov, 1e-12) {
                return Err(Error::invalid("covariance is not symmetric"));
            }
            let (vals, vecs) = sym_eigen(cov);
            if vals.min() <= 0.0 {
                return Err(Error::invalid(format!(
                    "covariance is not positive definite (min eigenvalue {})",
                    vals.min()
                )));
            }
            eig_vals.push(vals);
            eig_vecs.push(vecs);
        }
        let sampler = WeightedIndex::new(&weights).map_err(|e| Error::invalid(format!("mixture weights: {e}")))?;
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { weights, log_weights, means, covs, eig_vals, eig_vecs, sampler })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vector] {
        &self.means
    }

    pub fn covs(&self) -> &[Matrix] {
        &self.covs
    }

    /// Parameters of the law of `a·X + σ·Z`: means scale by `a`, covariances
    /// become `a²Σ + σ²I`.
    pub fn noised_params(&self, sigma: NoiseLevel) -> GaussianMixture {
        let a = sigma.signal_scale();
        let s2 = sigma.value() * sigma.value();
        let d = self.dim();
        let means = self.means.iter().map(|m| m * a).collect();
        let covs = self.covs.iter().map(|c| c * (a * a) + Matrix::identity(d, d) * s2).collect();
        GaussianMixture::new(self.weights.clone(), means, covs).expect("noising preserves mixture validity")
    }

    /// Per-component log density of `a·X + σ·Z` at `x` (including the log
    /// weight) and the matching component score.
    fn component_terms(&self, a: f64, s2: f64, x: &Vector) -> (Vec<f64>, Vec<Vector>) {
        let d = self.dim() as f64;
        let mut logs = Vec::with_capacity(self.n_components());
        let mut grads = Vec::with_capacity(self.n_components());
        for j in 0..self.n_components() {
            let q = &self.eig_vecs[j];
            let lam = self.eig_vals[j].map(|l| a * a * l + s2);
            let diff = x - &self.means[j] * a;
            let proj = q.tr_mul(&diff);
            let scaled = proj.component_div(&lam);
            let quad = proj.dot(&scaled);
            let logdet: f64 = lam.iter().map(|l| l.ln()).sum();
            logs.push(self.log_weights[j] - 0.5 * quad - 0.5 * logdet - 0.5 * d * (2.0 * PI).ln());
            grads.push(-(q * scaled));
        }
        (logs, grads)
    }

    pub fn log_density(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let (logs, _) = self.component_terms(1.0, 0.0, x);
        Ok(log_sum_exp(&logs))
    }

    /// Log density of the noised law at `x`.
    pub fn noised_log_density(&self, sigma: NoiseLevel, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let a = sigma.signal_scale();
        let (logs, _) = self.component_terms(a, sigma.value().powi(2), x);
        Ok(log_sum_exp(&logs))
    }

    /// `∇ log p_σ(x)` as a responsibility-weighted sum of component scores.
    pub fn noised_score(&self, sigma: NoiseLevel, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        let a = sigma.signal_scale();
        let (logs, grads) = self.component_terms(a, sigma.value().powi(2), x);
        weighted_score(&logs, &grads, self.dim())
    }

    pub fn sample_untruncated(&self, rng: &mut SimRng) -> Vector {
        let j = self.sampler.sample(rng);
        let d = self.dim();
        let z = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let scaled = z.component_mul(&self.eig_vals[j].map(f64::sqrt));
        &self.means[j] + &self.eig_vecs[j] * scaled
    }

    /// Upper bound on the mass outside `B(radius)`, by a chi-square tail on
    /// each component using its largest covariance eigenvalue.
    pub fn tail_mass_bound(&self, radius: f64) -> f64 {
        let d = self.dim() as f64;
        let chi = ChiSquared::new(d).expect("positive degrees of freedom");
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.eig_vals))
            .map(|(w, (mu, vals))| {
                let margin = radius - mu.norm();
                if margin <= 0.0 {
                    return *w;
                }
                let r2 = margin * margin / vals.max();
                w * chi.sf(r2)
            })
            .sum()
    }
}

pub(crate) fn weighted_score(logs: &[f64], grads: &[Vector], d: usize) -> Result<Vector> {
    let lse = log_sum_exp(logs);
    if !lse.is_finite() {
        return Err(Error::Numerical(
            "all mixture responsibilities underflow; query point is numerically unreachable".into(),
        ));
    }
    let mut out = Vector::zeros(d);
    for (l, g) in logs.iter().zip(grads) {
        let r = (l - lse).exp();
        if r > 0.0 {
            out.axpy(r, g, 1.0);
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite score".into()));
    }
    Ok(out)
}

/// Gaussian mixture whose untruncated mass outside `B(C)` is below
/// [`MAX_TAIL_MASS`], sampled with rejection against the ball.
#[derive(Debug, Clone)]
pub struct GaussianMixtureModel {
    mixture: GaussianMixture,
    radius: f64,
}

impl GaussianMixtureModel {
    pub fn new(weights: Vec<f64>, means: Vec<Vector>, covs: Vec<Matrix>, radius: f64) -> Result<Self> {
        Self::from_mixture(GaussianMixture::new(weights, means, covs)?, radius)
    }

    pub fn from_mixture(mixture: GaussianMixture, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("support radius must be positive, got {radius}")));
        }
        let tail = mixture.tail_mass_bound(radius);
        if tail.is_nan() || tail >= MAX_TAIL_MASS {
            return Err(Error::Configuration(format!(
                "mixture places up to {tail:e} mass outside the ball of radius {radius}"
            )));
        }
        Ok(Self { mixture, radius })
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.mixture.dim()
    }

    pub fn noised_params(&self, sigma: NoiseLevel) -> GaussianMixture {
        self.mixture.noised_params(sigma)
    }

    pub fn sample(&self, rng: &mut SimRng) -> Result<Vector> {
        for _ in 0..MAX_REJECTIONS {
            let x = self.mixture.sample_untruncated(rng);
            if x.norm() <= self.radius {
                return Ok(x);
            }
        }
        Err(Error::Configuration(format!(
            "{MAX_REJECTIONS} consecutive draws fell outside the support ball; radius too tight"
        )))
    }

    /// Tilt by `exp(<v, x>)`: component j moves to `N(μ_j + Σ_j v, Σ_j)` with
    /// weight proportional to `w_j exp(<v, μ_j> + ½ vᵀΣ_j v)`.
    pub fn tilt(&self, v: &Vector) -> Result<Self> {
        check_dim(self.dim(), v.len())?;
        let mix = &self.mixture;
        let logs: Vec<f64> = (0..mix.n_components())
            .map(|j| mix.log_weights[j] + v.dot(&mix.means[j]) + 0.5 * v.dot(&(&mix.covs[j] * v)))
            .collect();
        let weights = crate::linalg::softmax(&logs);
        let means = (0..mix.n_components()).map(|j| &mix.means[j] + &mix.covs[j] * v).collect();
        Self::new(weights, means, mix.covs.clone(), self.radius)
    }

    /// `log E[exp <v, X>]`, treating truncation as negligible.
    pub fn log_normalizer(&self, v: &Vector) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        let mix = &self.mixture;
        let logs: Vec<f64> = (0..mix.n_components())
            .map(|j| mix.log_weights[j] + v.dot(&mix.means[j]) + 0.5 * v.dot(&(&mix.covs[j] * v)))
            .collect();
        Ok(log_sum_exp(&logs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(radius: f64) -> GaussianMixtureModel {
        GaussianMixtureModel::new(vec![1.0], vec![Vector::from_vec(vec![0.0])], vec![Matrix::identity(1, 1)], radius)
            .unwrap()
    }

    #[test]
    fn noised_unit_gaussian_is_unchanged() {
        let m = std_normal(8.0);
        let n = m.noised_params(NoiseLevel::new(0.6).unwrap());
        assert!((n.covs()[0][(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(n.means()[0][0], 0.0);
    }

    #[test]
    fn noised_fig1_mixture() {
        let m = GaussianMixtureModel::new(
            vec![0.5, 0.5],
            vec![Vector::from_vec(vec![-2.0]), Vector::from_vec(vec![2.0])],
            vec![Matrix::from_element(1, 1, 0.49); 2],
            8.0,
        )
        .unwrap();
        let n = m.noised_params(NoiseLevel::new(0.5).unwrap());
        let a = 0.75f64.sqrt();
        assert!((n.means()[1][0] - 2.0 * a).abs() < 1e-15);
        assert!((n.means()[0][0] + 3f64.sqrt()).abs() < 1e-15);
        assert!((n.covs()[0][(0, 0)] - 0.6175).abs() < 1e-15);
    }

    #[test]
    fn score_of_standard_normal_is_minus_x() {
        let m = std_normal(8.0);
        for s in [0.1, 0.5, 0.9] {
            let x = Vector::from_vec(vec![1.7]);
            let g = m.mixture().noised_score(NoiseLevel::new(s).unwrap(), &x).unwrap();
            assert!((g[0] + 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn tight_radius_is_rejected() {
        let err =
            GaussianMixtureModel::new(vec![1.0], vec![Vector::from_vec(vec![0.0])], vec![Matrix::identity(1, 1)], 3.0);
        assert!(matches!(err, Err(Error::Configuration(_))));
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GaussianMixtureModel::new(vec![1.0], vec![Vector::zeros(2)], vec![asym], 10.0).is_err());
        let indef = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianMixtureModel::new(vec![1.0], vec![Vector::zeros(2)], vec![indef], 10.0).is_err());
        assert!(GaussianMixtureModel::new(
            vec![0.6, 0.6],
            vec![Vector::zeros(1), Vector::zeros(1)],
            vec![Matrix::identity(1, 1); 2],
            10.0
        )
        .is_err());
    }

    #[test]
    fn tilting_standard_normal_shifts_mean() {
        let t = std_normal(10.0).tilt(&Vector::from_vec(vec![1.0])).unwrap();
        assert!((t.mixture().means()[0][0] - 1.0).abs() < 1e-15);
        let z = std_normal(10.0).log_normalizer(&Vector::from_vec(vec![1.0])).unwrap();
        assert!((z - 0.5).abs() < 1e-15);
    }
}
