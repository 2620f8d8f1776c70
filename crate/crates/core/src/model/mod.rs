//! Base distributions: truncated Gaussian mixtures and finitely supported
//! laws, each with an exact sampler and a closed-form noised-score oracle.

mod discrete;
mod gmm;

pub use discrete::DiscreteModel;
pub use gmm::{GaussianMixture, GaussianMixtureModel, MAX_REJECTIONS, MAX_TAIL_MASS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, vec_from, Vector};
use crate::rng::{rng_from_seed, SimRng};

/// Noise scale `σ ∈ (0, 1)` of the variance-preserving corruption
/// `√(1−σ²)·X + σ·Z`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma < 1.0 {
            Ok(Self(sigma))
        } else {
            Err(Error::invalid(format!("noise level must lie in (0, 1), got {sigma}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `a = √(1−σ²)`.
    pub fn signal_scale(self) -> f64 {
        (1.0 - self.0 * self.0).sqrt()
    }
}

/// Access to `∇ log p_σ` for every noise level.
pub trait ScoreOracle: Send + Sync {
    fn dim(&self) -> usize;
    /// Support radius `C` of the clean law.
    fn radius(&self) -> f64;
    fn score(&self, sigma: NoiseLevel, x: &Vector) -> Result<Vector>;
}

/// A base law with exact density, sampler and score.
#[derive(Debug, Clone)]
pub enum BaseModel {
    Gmm(GaussianMixtureModel),
    Discrete(DiscreteModel),
}

impl BaseModel {
    pub fn dim(&self) -> usize {
        match self {
            BaseModel::Gmm(m) => m.dim(),
            BaseModel::Discrete(m) => m.dim(),
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            BaseModel::Gmm(m) => m.radius(),
            BaseModel::Discrete(m) => m.radius(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BaseModel::Gmm(_) => "gmm",
            BaseModel::Discrete(_) => "discrete",
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> Result<Vector> {
        match self {
            BaseModel::Gmm(m) => m.sample(rng),
            BaseModel::Discrete(m) => Ok(m.sample(rng)),
        }
    }

    /// `n` i.i.d. exact draws under `seed`.
    pub fn sample_exact(&self, n: usize, seed: u64) -> Result<SampleBatch> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let mut rng = rng_from_seed(seed);
        let points = (0..n).map(|_| self.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
        Ok(SampleBatch {
            points,
            seed,
            producer: format!("exact:{}", self.kind()),
            dim: self.dim(),
            radius: self.radius(),
        })
    }

    /// Exact linear tilt `p(x) exp(<v, x>)`, renormalised.
    pub fn tilt(&self, v: &Vector) -> Result<BaseModel> {
        Ok(match self {
            BaseModel::Gmm(m) => BaseModel::Gmm(m.tilt(v)?),
            BaseModel::Discrete(m) => BaseModel::Discrete(m.tilt(v)?),
        })
    }

    /// `log Z_P(v) = log E exp(<v, X>)`.
    pub fn log_normalizer(&self, v: &Vector) -> Result<f64> {
        match self {
            BaseModel::Gmm(m) => m.log_normalizer(v),
            BaseModel::Discrete(m) => m.log_normalizer(v),
        }
    }

    pub fn noised_log_density(&self, sigma: NoiseLevel, x: &Vector) -> Result<f64> {
        match self {
            BaseModel::Gmm(m) => m.mixture().noised_log_density(sigma, x),
            BaseModel::Discrete(m) => m.noised_log_density(sigma, x),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn to_spec(&self) -> ModelSpec {
        match self {
            BaseModel::Gmm(m) => ModelSpec::Gmm {
                weights: m.mixture().weights().to_vec(),
                means: m.mixture().means().iter().map(|v| v.iter().copied().collect()).collect(),
                covs: m.mixture().covs().iter().map(matrix_to_rows).collect(),
                radius: m.radius(),
            },
            BaseModel::Discrete(m) => ModelSpec::Discrete {
                atoms: m.atoms().iter().map(|v| v.iter().copied().collect()).collect(),
                probs: m.probs().to_vec(),
                radius: m.radius(),
            },
        }
    }
}

impl ScoreOracle for BaseModel {
    fn dim(&self) -> usize {
        BaseModel::dim(self)
    }

    fn radius(&self) -> f64 {
        BaseModel::radius(self)
    }

    fn score(&self, sigma: NoiseLevel, x: &Vector) -> Result<Vector> {
        match self {
            BaseModel::Gmm(m) => m.mixture().noised_score(sigma, x),
            BaseModel::Discrete(m) => m.noised_score(sigma, x),
        }
    }
}

/// JSON form of a base model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Gmm {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covs: Vec<Vec<Vec<f64>>>,
        #[serde(rename = "C")]
        radius: f64,
    },
    Discrete {
        atoms: Vec<Vec<f64>>,
        probs: Vec<f64>,
        #[serde(rename = "C")]
        radius: f64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<BaseModel> {
        match self {
            ModelSpec::Gmm { weights, means, covs, radius } => {
                let covs = covs
                    .iter()
                    .map(|c| matrix_from_rows(c).ok_or_else(|| Error::invalid("ragged covariance matrix")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(BaseModel::Gmm(GaussianMixtureModel::new(weights.clone(), vec_from(means), covs, *radius)?))
            }
            ModelSpec::Discrete { atoms, probs, radius } => {
                Ok(BaseModel::Discrete(DiscreteModel::new(vec_from(atoms), probs.clone(), *radius)?))
            }
        }
    }
}

/// Points drawn by one producer under one seed.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub points: Vec<Vector>,
    pub seed: u64,
    pub producer: String,
    pub dim: usize,
    pub radius: f64,
}
