//! Linear exponential tilts `p(x; v) ∝ p(x) exp(<v, x>)`: exact tilts of the
//! closed-form bases, a tilted score oracle for oracle-only sampling, and
//! normaliser estimation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffusion::{steps_for_accuracy, DiffusionSampler};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, project_ball_mut, Vector};
use crate::model::{BaseModel, NoiseLevel, ScoreOracle};
use crate::rng::SimRng;

/// Tilt direction `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltVector(Vector);

impl TiltVector {
    pub fn new(v: Vector) -> Result<Self> {
        if !all_finite(&v) {
            return Err(Error::invalid("tilt vector must be finite"));
        }
        Ok(Self(v))
    }

    pub fn zeros(d: usize) -> Self {
        Self(Vector::zeros(d))
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizerMethod {
    Exact,
    Mc,
    Annealed,
}

impl std::str::FromStr for NormalizerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "mc" => Ok(Self::Mc),
            "annealed" => Ok(Self::Annealed),
            other => Err(Error::invalid(format!("unknown normalizer backend {other:?}"))),
        }
    }
}

/// Estimate of `Z_P(v) = E_P exp(<v, X>)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizerEstimate {
    pub value: f64,
    pub log_value: f64,
    pub eta: f64,
    pub delta: f64,
    pub method: NormalizerMethod,
    /// Draws consumed (0 for closed forms).
    pub samples: u64,
}

/// Draws from one fixed linear tilt.
pub trait TiltedSampler: Send + Sync {
    fn sample(&self, rng: &mut SimRng) -> Result<Vector>;
}

/// Access to the two linear-tilt operations: sampling `P_v` to W2 accuracy
/// `eps` inside `B(C)` and estimating `Z_P(v)`.
pub trait LinearTiltPrimitive: Send + Sync {
    fn dim(&self) -> usize;
    fn radius(&self) -> f64;
    /// Sampler for `P_v` with target accuracy `eps`.
    fn prepare(&self, v: &TiltVector, eps: f64) -> Result<Box<dyn TiltedSampler>>;
    /// `log Z_P(v)` in closed form, when the backend knows it.
    fn exact_log_normalizer(&self, v: &TiltVector) -> Option<Result<f64>>;
    fn name(&self) -> &'static str;
}

/// Closed-form tilts of a known base model.
#[derive(Debug, Clone)]
pub struct ExactTilt {
    model: BaseModel,
}

impl ExactTilt {
    pub fn new(model: BaseModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &BaseModel {
        &self.model
    }
}

struct ExactSampler {
    model: BaseModel,
}

impl TiltedSampler for ExactSampler {
    fn sample(&self, rng: &mut SimRng) -> Result<Vector> {
        let mut x = self.model.sample(rng)?;
        project_ball_mut(&mut x, self.model.radius());
        Ok(x)
    }
}

impl LinearTiltPrimitive for ExactTilt {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn radius(&self) -> f64 {
        self.model.radius()
    }

    fn prepare(&self, v: &TiltVector, _eps: f64) -> Result<Box<dyn TiltedSampler>> {
        Ok(Box::new(ExactSampler { model: tilt_exact(&self.model, v)? }))
    }

    fn exact_log_normalizer(&self, v: &TiltVector) -> Option<Result<f64>> {
        Some(self.model.log_normalizer(v.as_vector()))
    }

    fn name(&self) -> &'static str {
        "exact"
    }
}

/// Oracle-only tilts: reverse diffusion on the tilted score.
#[derive(Clone)]
pub struct DiffusionTilt {
    oracle: Arc<dyn ScoreOracle>,
    /// Upper limit on steps per draw; the accuracy rule is clipped to it.
    pub max_steps: usize,
    /// Fixed step count, overriding the accuracy rule.
    pub fixed_steps: Option<usize>,
}

impl DiffusionTilt {
    pub fn new(oracle: Arc<dyn ScoreOracle>) -> Self {
        Self { oracle, max_steps: 2000, fixed_steps: None }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.fixed_steps = Some(steps);
        self
    }

    /// Steps used for target accuracy `eps`, and whether the accuracy rule
    /// had to be clipped.
    pub fn steps_for(&self, eps: f64) -> (usize, bool) {
        if let Some(s) = self.fixed_steps {
            return (s, s < steps_for_accuracy(eps, self.oracle.radius()));
        }
        let want = steps_for_accuracy(eps, self.oracle.radius());
        (want.min(self.max_steps), want > self.max_steps)
    }
}

struct DiffusionTiltSampler {
    score: TiltedScore<Arc<dyn ScoreOracle>>,
    sampler: DiffusionSampler,
}

impl TiltedSampler for DiffusionTiltSampler {
    fn sample(&self, rng: &mut SimRng) -> Result<Vector> {
        self.sampler.sample(&self.score, rng)
    }
}

impl LinearTiltPrimitive for DiffusionTilt {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn radius(&self) -> f64 {
        self.oracle.radius()
    }

    fn prepare(&self, v: &TiltVector, eps: f64) -> Result<Box<dyn TiltedSampler>> {
        check_dim(self.oracle.dim(), v.dim())?;
        let (steps, _) = self.steps_for(eps);
        Ok(Box::new(DiffusionTiltSampler {
            score: TiltedScore::new(self.oracle.clone(), v.clone())?,
            sampler: DiffusionSampler::new(steps)?,
        }))
    }

    fn exact_log_normalizer(&self, _v: &TiltVector) -> Option<Result<f64>> {
        None
    }

    fn name(&self) -> &'static str {
        "diffusion"
    }
}

/// Exact tilt of a closed-form base model.
pub fn tilt_exact(model: &BaseModel, v: &TiltVector) -> Result<BaseModel> {
    if v.is_zero() {
        check_dim(model.dim(), v.dim())?;
        return Ok(model.clone());
    }
    model.tilt(v.as_vector())
}

/// Score of the noised tilted law, from the base score alone:
/// `∇ log p̃_σ(x) = v/a + s_σ(x + (σ²/a)·v)` with `a = √(1−σ²)`.
///
/// Tilting commutes with the Gaussian corruption up to this shift: the
/// factor `exp(<v, x₀>)` inside the convolution integral completes the
/// square against `N(x; a·x₀, σ²I)` to give `exp(<v, x>/a)·p_σ(x + σ²v/a)`.
pub struct TiltedScore<O> {
    base: O,
    v: TiltVector,
}

impl<O: ScoreOracle> TiltedScore<O> {
    pub fn new(base: O, v: TiltVector) -> Result<Self> {
        check_dim(base.dim(), v.dim())?;
        Ok(Self { base, v })
    }
}

impl<O: ScoreOracle> ScoreOracle for TiltedScore<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn radius(&self) -> f64 {
        self.base.radius()
    }

    fn score(&self, sigma: NoiseLevel, x: &Vector) -> Result<Vector> {
        tilted_score(&self.base, &self.v, sigma, x)
    }
}

impl ScoreOracle for Arc<dyn ScoreOracle> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn radius(&self) -> f64 {
        (**self).radius()
    }

    fn score(&self, sigma: NoiseLevel, x: &Vector) -> Result<Vector> {
        (**self).score(sigma, x)
    }
}

impl<O: ScoreOracle + ?Sized> ScoreOracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn radius(&self) -> f64 {
        (**self).radius()
    }

    fn score(&self, sigma: NoiseLevel, x: &Vector) -> Result<Vector> {
        (**self).score(sigma, x)
    }
}

pub fn tilted_score<O: ScoreOracle + ?Sized>(
    base: &O,
    v: &TiltVector,
    sigma: NoiseLevel,
    x: &Vector,
) -> Result<Vector> {
    check_dim(base.dim(), x.len())?;
    if v.is_zero() {
        return base.score(sigma, x);
    }
    let a = sigma.signal_scale();
    let shift = v.as_vector() * (sigma.value().powi(2) / a);
    let s = base.score(sigma, &(x + shift))?;
    Ok(s + v.as_vector() / a)
}

/// One draw from `P_v` within `B(C)`.
pub fn sample_linear_tilt(
    backend: &dyn LinearTiltPrimitive,
    v: &TiltVector,
    eps: f64,
    rng: &mut SimRng,
) -> Result<Vector> {
    if !(eps > 0.0) {
        return Err(Error::invalid("accuracy must be positive"));
    }
    let mut x = backend.prepare(v, eps)?.sample(rng)?;
    project_ball_mut(&mut x, backend.radius());
    Ok(x)
}

/// Budget and accuracy settings for normaliser estimation.
#[derive(Debug, Clone, Copy)]
pub struct NormalizerConfig {
    pub method: NormalizerMethod,
    /// Cap on the total number of draws.
    pub max_samples: u64,
    /// W2 accuracy passed to the tilt sampler for annealed stages.
    pub sampler_eps: f64,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self { method: NormalizerMethod::Exact, max_samples: 50_000_000, sampler_eps: 0.05 }
    }
}

impl NormalizerConfig {
    pub fn with_method(method: NormalizerMethod) -> Self {
        Self { method, ..Self::default() }
    }
}

/// Hoeffding sample size for relative accuracy `eta` with failure probability
/// `delta` on a mean of `exp(<v, X>)` with `‖v‖C = spread`:
/// `⌈exp(4·spread)·ln(2/δ) / (2η²)⌉`.
pub fn hoeffding_samples(spread: f64, eta: f64, delta: f64) -> f64 {
    ((4.0 * spread).exp() * (2.0 / delta).ln() / (2.0 * eta * eta)).ceil()
}

/// Number of annealing stages for `‖v‖C = spread`.
pub fn annealing_stages(spread: f64) -> usize {
    ((2.0 * spread).ceil() as usize).max(1)
}

fn check_accuracy(eta: f64, delta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Estimate `Z_P(v)` to relative accuracy `eta` with probability `1 − delta`.
///
/// * `exact`: closed form (accuracy treated as satisfied).
/// * `mc`: plain Monte Carlo over base draws with the Hoeffding budget.
/// * `annealed`: telescoping product over `t_j = j/J` of ratio estimates
///   `E_{P_{t_j v}} exp(<v/J, X>)`, each with accuracy
///   `(1+η)^{1/J} − 1` and failure budget `δ/J`.
pub fn estimate_normalizer(
    backend: &dyn LinearTiltPrimitive,
    v: &TiltVector,
    eta: f64,
    delta: f64,
    config: &NormalizerConfig,
    rng: &mut SimRng,
) -> Result<NormalizerEstimate> {
    check_accuracy(eta, delta)?;
    check_dim(backend.dim(), v.dim())?;
    let done = |log_value: f64, samples: u64, method| NormalizerEstimate {
        value: log_value.exp(),
        log_value,
        eta,
        delta,
        method,
        samples,
    };
    if v.is_zero() {
        return Ok(done(0.0, 0, config.method));
    }
    let spread = v.norm() * backend.radius();
    match config.method {
        NormalizerMethod::Exact => {
            let log_z = backend.exact_log_normalizer(v).ok_or_else(|| {
                Error::Capability(format!("{} backend has no closed-form normalizer", backend.name()))
            })??;
            Ok(done(log_z, 0, NormalizerMethod::Exact))
        }
        NormalizerMethod::Mc => {
            let n = hoeffding_samples(spread, eta, delta);
            if n > config.max_samples as f64 {
                return Err(Error::Budget(format!(
                    "Monte Carlo normalizer needs {n:e} draws (cap {}); use the annealed backend",
                    config.max_samples
                )));
            }
            let sampler = backend.prepare(&TiltVector::zeros(v.dim()), config.sampler_eps)?;
            let log_z = log_mean_exp(&*sampler, v.as_vector(), n as u64, rng)?;
            Ok(done(log_z, n as u64, NormalizerMethod::Mc))
        }
        NormalizerMethod::Annealed => {
            let stages = annealing_stages(spread);
            let eta_j = (1.0 + eta).powf(1.0 / stages as f64) - 1.0;
            let delta_j = delta / stages as f64;
            let n = hoeffding_samples(spread / stages as f64, eta_j, delta_j);
            let total = n * stages as f64;
            if total > config.max_samples as f64 {
                return Err(Error::Budget(format!(
                    "annealed normalizer needs {total:e} draws (cap {})",
                    config.max_samples
                )));
            }
            let step = v.as_vector() / stages as f64;
            let mut log_z = 0.0;
            for j in 0..stages {
                let t = TiltVector::new(v.as_vector() * (j as f64 / stages as f64))?;
                let sampler = backend.prepare(&t, config.sampler_eps)?;
                log_z += log_mean_exp(&*sampler, &step, n as u64, rng)?;
            }
            Ok(done(log_z, total as u64, NormalizerMethod::Annealed))
        }
    }
}

/// `log( (1/n) Σ exp(<v, X_i>) )` over `n` draws, accumulated with a running
/// max shift.
fn log_mean_exp(sampler: &dyn TiltedSampler, v: &Vector, n: u64, rng: &mut SimRng) -> Result<f64> {
    let mut shift = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for _ in 0..n {
        let e = v.dot(&sampler.sample(rng)?);
        if e > shift {
            acc = acc * (shift - e).exp() + 1.0;
            shift = e;
        } else {
            acc += (e - shift).exp();
        }
    }
    Ok(shift + (acc / n as f64).ln())
}
