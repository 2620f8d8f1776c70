//! Reverse-diffusion sampler driven only by a score oracle.
//!
//! The forward corruption is variance preserving, `X_σ = a(σ)·X + σ·Z` with
//! `a(σ) = √(1−σ²)`. The reverse chain starts from `N(0, I)` at `σ_max`,
//! walks a geometric grid of noise levels with ancestral (posterior) steps
//! built from the Tweedie denoiser, denoises once more at `σ_min` and
//! projects onto the support ball.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, project_ball_mut, Vector};
use crate::model::{NoiseLevel, ScoreOracle};
use crate::rng::SimRng;

pub const SIGMA_MAX: f64 = 0.995;
pub const SIGMA_MIN: f64 = 1e-3;
/// Floor on the step count produced by [`steps_for_accuracy`].
pub const MIN_AUTO_STEPS: usize = 250;

/// Step count used for a target W2 accuracy `eps` on a law supported in `B(C)`:
/// `max(250, ⌈50·C/ε⌉)`.
pub fn steps_for_accuracy(eps: f64, radius: f64) -> usize {
    let raw = (50.0 * radius / eps).ceil();
    if raw.is_finite() && raw < usize::MAX as f64 {
        MIN_AUTO_STEPS.max(raw as usize)
    } else {
        usize::MAX
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionSampler {
    sigmas: Vec<f64>,
}

impl DiffusionSampler {
    pub fn new(steps: usize) -> Result<Self> {
        Self::with_range(steps, SIGMA_MAX, SIGMA_MIN)
    }

    pub fn with_range(steps: usize, sigma_max: f64, sigma_min: f64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::invalid(format!("diffusion needs at least 2 steps, got {steps}")));
        }
        if !(0.0 < sigma_min && sigma_min < sigma_max && sigma_max < 1.0) {
            return Err(Error::invalid("noise range must satisfy 0 < min < max < 1"));
        }
        let ratio = (sigma_min / sigma_max).ln() / (steps - 1) as f64;
        let sigmas = (0..steps).map(|i| sigma_max * (ratio * i as f64).exp()).collect();
        Ok(Self { sigmas })
    }

    pub fn steps(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// True when the grid is coarser than [`steps_for_accuracy`] asks for.
    pub fn under_resolved(&self, eps: f64, radius: f64) -> bool {
        self.steps() < steps_for_accuracy(eps, radius)
    }

    pub fn sample<O: ScoreOracle + ?Sized>(&self, oracle: &O, rng: &mut SimRng) -> Result<Vector> {
        let d = oracle.dim();
        let mut x = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        for w in self.sigmas.windows(2) {
            let (st, ss) = (w[0], w[1]);
            let x0 = denoise(oracle, st, &x)?;
            let (at, as_) = ((1.0 - st * st).sqrt(), (1.0 - ss * ss).sqrt());
            let a_ts = at / as_;
            let var_ts = st * st - a_ts * a_ts * ss * ss;
            let c_x = a_ts * ss * ss / (st * st);
            let c_0 = as_ * var_ts / (st * st);
            let std = (var_ts * ss * ss / (st * st)).max(0.0).sqrt();
            let noise = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
            x = &x * c_x + x0 * c_0 + noise * std;
        }
        let mut out = denoise(oracle, *self.sigmas.last().expect("at least two levels"), &x)?;
        project_ball_mut(&mut out, oracle.radius());
        Ok(out)
    }
}

/// Tweedie estimate `E[X | X_σ = x] = (x + σ² s_σ(x)) / a`.
fn denoise<O: ScoreOracle + ?Sized>(oracle: &O, sigma: f64, x: &Vector) -> Result<Vector> {
    let level = NoiseLevel::new(sigma)?;
    let s = oracle.score(level, x)?;
    if !all_finite(&s) {
        return Err(Error::Oracle(format!("non-finite score at sigma = {sigma}")));
    }
    Ok((x + s * (sigma * sigma)) / level.signal_scale())
}

/// One draw from the reverse process with `steps` levels.
pub fn sample_via_diffusion<O: ScoreOracle + ?Sized>(oracle: &O, steps: usize, rng: &mut SimRng) -> Result<Vector> {
    DiffusionSampler::new(steps)?.sample(oracle, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaseModel, DiscreteModel};
    use crate::rng::rng_from_seed;

    #[test]
    fn grid_is_geometric_and_descending() {
        let s = DiffusionSampler::new(10).unwrap();
        assert_eq!(s.sigmas()[0], SIGMA_MAX);
        assert!((s.sigmas()[9] - SIGMA_MIN).abs() < 1e-15);
        assert!(s.sigmas().windows(2).all(|w| w[1] < w[0]));
        assert!(DiffusionSampler::new(1).is_err());
    }

    #[test]
    fn step_rule() {
        assert_eq!(steps_for_accuracy(1.0, 1.0), 250);
        assert_eq!(steps_for_accuracy(0.1, 1.0), 500);
    }

    #[test]
    fn point_mass_collapses() {
        let m = BaseModel::Discrete(DiscreteModel::new(vec![Vector::zeros(2)], vec![1.0], 1.0).unwrap());
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            let x = sample_via_diffusion(&m, 500, &mut rng).unwrap();
            assert!(x.norm() <= 0.05);
        }
    }

    struct Broken;
    impl ScoreOracle for Broken {
        fn dim(&self) -> usize {
            1
        }
        fn radius(&self) -> f64 {
            1.0
        }
        fn score(&self, _: NoiseLevel, _: &Vector) -> Result<Vector> {
            Ok(Vector::from_vec(vec![f64::NAN]))
        }
    }

    #[test]
    fn non_finite_scores_are_oracle_errors() {
        let mut rng = rng_from_seed(1);
        assert!(matches!(sample_via_diffusion(&Broken, 10, &mut rng), Err(Error::Oracle(_))));
    }
}
