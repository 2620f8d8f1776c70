use super::Envelope;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{softmax, Matrix};
use crate::rng::SimRng;
use crate::tilt::{estimate_normalizer, LinearTiltPrimitive, NormalizerConfig, NormalizerEstimate, TiltVector};

/// `Q_G = Σ_i π_i P_{v_i}` with `v_i = Aᵀz_i` and `π_i ∝ w_i Z_P(v_i)`.
#[derive(Debug, Clone)]
pub struct MixtureProposal {
    pub tilts: Vec<TiltVector>,
    pub normalizers: Vec<NormalizerEstimate>,
    pub weights: Vec<f64>,
}

impl MixtureProposal {
    pub fn m(&self) -> usize {
        self.tilts.len()
    }
}

/// Estimates every `Z_P(v_i)` with accuracy `eta` and failure budget
/// `delta/m`, then normalises `b_i + log Ẑ_i` in log space.
pub fn build_proposal(
    env: &Envelope,
    a: &Matrix,
    backend: &dyn LinearTiltPrimitive,
    eta: f64,
    delta: f64,
    config: &NormalizerConfig,
    rng: &mut SimRng,
) -> Result<MixtureProposal> {
    check_dim(env.dim(), a.nrows())?;
    check_dim(backend.dim(), a.ncols())?;
    let m = env.m();
    let at = a.transpose();
    let mut tilts = Vec::with_capacity(m);
    let mut normalizers = Vec::with_capacity(m);
    let mut logits = Vec::with_capacity(m);
    for (i, (z, b)) in env.slopes().iter().zip(env.offsets()).enumerate() {
        let v = TiltVector::new(&at * z)?;
        let est = estimate_normalizer(backend, &v, eta, delta / m as f64, config, rng).map_err(|e| match e {
            Error::Budget(msg) => Error::Budget(format!("normalizer {i} of {m}: {msg}")),
            other => other,
        })?;
        logits.push(b + est.log_value);
        tilts.push(v);
        normalizers.push(est);
    }
    if logits.iter().any(|l| l.is_nan()) {
        return Err(Error::Numerical("proposal weights are undefined".into()));
    }
    Ok(MixtureProposal { tilts, normalizers, weights: softmax(&logits) })
}
