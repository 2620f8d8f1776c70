use serde::Serialize;

use super::{prox_objective, ProxOracle};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::rewards::RewardSpec;
use crate::rng::SimRng;
use crate::tilt::TiltedSampler;

/// Base draws `y_i` with their transported images `x_i = T_λ(y_i)`.
#[derive(Debug, Clone, Default)]
pub struct CoupledBatch {
    pub ys: Vec<Vector>,
    pub xs: Vec<Vector>,
}

impl CoupledBatch {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObjectiveEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

/// `n` base draws pushed through the proximal map.
pub fn sample_w2_aligned(
    base: &dyn TiltedSampler,
    prox: &dyn ProxOracle,
    n: usize,
    rng: &mut SimRng,
) -> Result<CoupledBatch> {
    let mut batch = CoupledBatch { ys: Vec::with_capacity(n), xs: Vec::with_capacity(n) };
    for _ in 0..n {
        let y = base.sample(rng)?;
        check_dim(prox.dim(), y.len())?;
        let x = prox.prox(&y)?;
        batch.ys.push(y);
        batch.xs.push(x);
    }
    Ok(batch)
}

/// Mean of `r(x_i) − λ‖x_i − y_i‖²` along the coupling, with its standard error.
pub fn objective_value(batch: &CoupledBatch, reward: &RewardSpec, lambda: f64) -> Result<ObjectiveEstimate> {
    if batch.xs.len() != batch.ys.len() {
        return Err(Error::invalid("coupled batch has unequal sides"));
    }
    let n = batch.len();
    if n == 0 {
        return Ok(ObjectiveEstimate { mean: f64::NAN, std_err: f64::NAN, n });
    }
    let vals = batch
        .xs
        .iter()
        .zip(&batch.ys)
        .map(|(x, y)| Ok(prox_objective(reward.eval(x)?, lambda, x, y)))
        .collect::<Result<Vec<f64>>>()?;
    let mean = vals.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(ObjectiveEstimate { mean, std_err, n })
}
