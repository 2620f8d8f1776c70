use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use super::{build_envelope, build_net, build_proposal, compute_params, Alg1Params, Envelope, MixtureProposal};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{operator_norm, project_ball_mut, Matrix, Vector};
use crate::rewards::LowDimFunction;
use crate::rng::{derived_rng, SimRng};
use crate::tilt::{LinearTiltPrimitive, NormalizerConfig, TiltVector, TiltedSampler};

/// Acceptance values above `1 + ACCEPT_SLACK` mean the envelope is broken.
const ACCEPT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct KlConfig {
    pub eps: f64,
    pub delta: f64,
    pub normalizer: NormalizerConfig,
    pub net_cap: usize,
    /// Lower bound on the normaliser accuracy actually requested. The
    /// prescribed `η` is far below what sampling backends can afford.
    pub eta_floor: Option<f64>,
}

impl KlConfig {
    pub fn new(eps: f64, delta: f64) -> Self {
        Self { eps, delta, normalizer: NormalizerConfig::default(), net_cap: super::DEFAULT_NET_CAP, eta_floor: None }
    }
}

/// Outcome of one output draw.
#[derive(Debug, Clone)]
pub struct KlDraw {
    pub point: Vector,
    /// Rejection trials used (0 on the `L = 0` path).
    pub trials: u64,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct KlDiagnostics {
    pub draws: u64,
    pub trials: u64,
    pub accepted: u64,
    pub fallbacks: u64,
    pub min_acceptance: f64,
}

impl KlDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.trials == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.trials as f64
        }
    }

    pub fn merge(&mut self, other: &KlDiagnostics) {
        self.draws += other.draws;
        self.trials += other.trials;
        self.accepted += other.accepted;
        self.fallbacks += other.fallbacks;
        self.min_acceptance = if self.draws == other.draws {
            other.min_acceptance
        } else {
            self.min_acceptance.min(other.min_acceptance)
        };
    }
}

struct Prepared {
    params: Alg1Params,
    envelope: Envelope,
    proposal: MixtureProposal,
    samplers: Vec<Box<dyn TiltedSampler>>,
    choose: WeightedIndex<f64>,
    eta_used: f64,
    net_bound: f64,
}

/// Sampler for `q(x) ∝ p(x)·exp(f(Ax))` with `f` convex and Lipschitz,
/// prepared once and reusable for any number of draws.
pub struct KlAligner {
    a: Matrix,
    f: LowDimFunction,
    radius: f64,
    prepared: Option<Prepared>,
    fallback: Box<dyn TiltedSampler>,
}

impl KlAligner {
    /// Builds net, envelope and proposal. Normaliser estimation draws from `rng`.
    pub fn new(
        backend: &dyn LinearTiltPrimitive,
        a: Matrix,
        f: LowDimFunction,
        config: &KlConfig,
        rng: &mut SimRng,
    ) -> Result<Self> {
        if !(config.eps > 0.0 && config.eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1), got {}", config.eps)));
        }
        if !(config.delta > 0.0 && config.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", config.delta)));
        }
        check_dim(f.dim(), a.nrows())?;
        check_dim(backend.dim(), a.ncols())?;
        if !f.curvature().is_convex() {
            return Err(Error::Precondition(
                "KL envelope sampling needs a convex reward; use the W2 geometry for concave rewards".into(),
            ));
        }
        if !f.has_subgradient() {
            return Err(Error::Precondition("KL envelope sampling needs a subgradient oracle".into()));
        }
        let l = f
            .lipschitz()
            .ok_or_else(|| Error::Precondition("KL envelope sampling needs a declared Lipschitz constant".into()))?;
        let radius = backend.radius();
        let s = operator_norm(&a);
        let big_r = s * radius;
        if let Some(fr) = f.radius() {
            if fr < big_r * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "reward oracle domain radius {fr} is smaller than ‖A‖·C = {big_r}"
                )));
            }
        }
        let fallback = backend.prepare(&TiltVector::zeros(backend.dim()), config.eps)?;
        if l == 0.0 || big_r == 0.0 {
            return Ok(Self { a, f, radius, prepared: None, fallback });
        }
        let h = 1.0 / (2.0 * l);
        let net = build_net(f.dim(), big_r, h, config.net_cap)?;
        let envelope = build_envelope(&f, &net)?;
        let params = compute_params(l, s, radius, envelope.m(), config.eps)?;
        let eta_used = config.eta_floor.map_or(params.eta, |fl| params.eta.max(fl));
        let proposal = build_proposal(&envelope, &a, backend, eta_used, config.delta, &config.normalizer, rng)?;
        let samplers = proposal.tilts.iter().map(|v| backend.prepare(v, params.eps_lin)).collect::<Result<Vec<_>>>()?;
        let choose = WeightedIndex::new(&proposal.weights)
            .map_err(|e| Error::Numerical(format!("proposal weights unusable: {e}")))?;
        Ok(Self {
            a,
            f,
            radius,
            prepared: Some(Prepared {
                params,
                envelope,
                proposal,
                samplers,
                choose,
                eta_used,
                net_bound: net.volumetric_bound(),
            }),
            fallback,
        })
    }

    /// `true` when `L = 0` (or `A = 0`) and draws come straight from the base.
    pub fn is_degenerate(&self) -> bool {
        self.prepared.is_none()
    }

    pub fn params(&self) -> Option<&Alg1Params> {
        self.prepared.as_ref().map(|p| &p.params)
    }

    pub fn envelope(&self) -> Option<&Envelope> {
        self.prepared.as_ref().map(|p| &p.envelope)
    }

    pub fn proposal(&self) -> Option<&MixtureProposal> {
        self.prepared.as_ref().map(|p| &p.proposal)
    }

    pub fn eta_used(&self) -> Option<f64> {
        self.prepared.as_ref().map(|p| p.eta_used)
    }

    /// `(1 + 2R/h)^k`, for comparison with the grid size actually used.
    pub fn net_volumetric_bound(&self) -> Option<f64> {
        self.prepared.as_ref().map(|p| p.net_bound)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Acceptance `exp(f(Ax) − G(Ax))` at `x`.
    pub fn acceptance(&self, x: &Vector) -> Result<f64> {
        let p = self.prepared.as_ref().ok_or_else(|| Error::Precondition("no envelope on the L = 0 path".into()))?;
        let u = &self.a * x;
        let acc = p.envelope.acceptance(self.f.value(&u)?, &u);
        if !(0.0..=1.0 + ACCEPT_SLACK).contains(&acc) {
            return Err(Error::EnvelopeViolation(acc));
        }
        Ok(acc)
    }

    /// One draw from the mixture proposal, projected onto `B(C)`.
    pub fn propose(&self, rng: &mut SimRng) -> Result<Vector> {
        let p = self.prepared.as_ref().ok_or_else(|| Error::Precondition("no proposal on the L = 0 path".into()))?;
        let i = p.choose.sample(rng);
        let mut x = p.samplers[i].sample(rng)?;
        project_ball_mut(&mut x, self.radius);
        Ok(x)
    }

    fn base_draw(&self, rng: &mut SimRng) -> Result<Vector> {
        let mut x = self.fallback.sample(rng)?;
        project_ball_mut(&mut x, self.radius);
        Ok(x)
    }

    /// One output draw: up to `N_rej` proposal/accept rounds, then the base.
    pub fn draw(&self, rng: &mut SimRng, stats: &mut KlDiagnostics) -> Result<KlDraw> {
        if stats.draws == 0 {
            stats.min_acceptance = f64::INFINITY;
        }
        stats.draws += 1;
        let Some(p) = &self.prepared else {
            return Ok(KlDraw { point: self.base_draw(rng)?, trials: 0, fallback: false });
        };
        for t in 1..=p.params.n_rej {
            let x = self.propose(rng)?;
            let acc = self.acceptance(&x)?;
            stats.trials += 1;
            stats.min_acceptance = stats.min_acceptance.min(acc);
            if rng.random::<f64>() < acc {
                stats.accepted += 1;
                return Ok(KlDraw { point: x, trials: t, fallback: false });
            }
        }
        stats.fallbacks += 1;
        Ok(KlDraw { point: self.base_draw(rng)?, trials: p.params.n_rej, fallback: true })
    }

    /// `n` draws with diagnostics.
    pub fn sample_n(&self, n: usize, rng: &mut SimRng) -> Result<(Vec<Vector>, KlDiagnostics)> {
        let mut stats = KlDiagnostics::default();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.draw(rng, &mut stats)?.point);
        }
        if n == 0 {
            stats.min_acceptance = f64::INFINITY;
        }
        Ok((out, stats))
    }
}

/// One draw from the KL-aligned law `∝ p·exp(f(Ax))`.
///
/// Preparation uses stream 0 of `seed`, the draw itself stream 1.
pub fn sample_kl_aligned(
    backend: &dyn LinearTiltPrimitive,
    a: &Matrix,
    f: &LowDimFunction,
    config: &KlConfig,
    seed: u64,
) -> Result<Vector> {
    let aligner = KlAligner::new(backend, a.clone(), f.clone(), config, &mut derived_rng(seed, 0))?;
    let mut stats = KlDiagnostics::default();
    Ok(aligner.draw(&mut derived_rng(seed, 1), &mut stats)?.point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaseModel, DiscreteModel};
    use crate::rng::rng_from_seed;
    use crate::tilt::ExactTilt;

    fn zero_one() -> ExactTilt {
        ExactTilt::new(BaseModel::Discrete(
            DiscreteModel::uniform(vec![Vector::from_vec(vec![0.0]), Vector::from_vec(vec![1.0])], 1.0).unwrap(),
        ))
    }

    #[test]
    fn identity_reward_on_two_atoms() {
        let f = LowDimFunction::max_affine(vec![(Vector::from_vec(vec![1.0]), 0.0)]).unwrap();
        let mut rng = rng_from_seed(5);
        let al = KlAligner::new(&zero_one(), Matrix::identity(1, 1), f, &KlConfig::new(0.1, 0.05), &mut rng).unwrap();
        let (xs, stats) = al.sample_n(100_000, &mut rng).unwrap();
        let p1 = xs.iter().filter(|x| x[0] > 0.5).count() as f64 / xs.len() as f64;
        let e = 1f64.exp();
        assert!((p1 - e / (1.0 + e)).abs() < 0.02, "{p1}");
        assert!(stats.min_acceptance >= al.params().unwrap().a0 - 1e-9);
    }

    #[test]
    fn constant_reward_uses_base() {
        let f = LowDimFunction::max_affine(vec![(Vector::zeros(1), 3.0)]).unwrap();
        let mut rng = rng_from_seed(6);
        let al = KlAligner::new(&zero_one(), Matrix::identity(1, 1), f, &KlConfig::new(0.1, 0.05), &mut rng).unwrap();
        assert!(al.is_degenerate());
        let (xs, _) = al.sample_n(100_000, &mut rng).unwrap();
        let p1 = xs.iter().filter(|x| x[0] > 0.5).count() as f64 / xs.len() as f64;
        assert!((p1 - 0.5).abs() < 0.02);
    }

    #[test]
    fn concave_reward_is_refused() {
        let f =
            LowDimFunction::quadratic(Matrix::from_element(1, 1, -0.15), Vector::from_vec(vec![0.6]), -0.6).unwrap();
        let mut rng = rng_from_seed(0);
        let r = KlAligner::new(&zero_one(), Matrix::identity(1, 1), f, &KlConfig::new(0.1, 0.05), &mut rng);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn lying_oracle_is_caught() {
        // Declared convex with zero subgradients, but large between net points.
        let f = LowDimFunction::custom(
            1,
            crate::rewards::Curvature::Convex,
            std::sync::Arc::new(|u: &Vector| 10.0 * (1.0 - (2.0 * std::f64::consts::PI * u[0]).cos())),
            Some(std::sync::Arc::new(|_: &Vector| Vector::zeros(1))),
        )
        .with_lipschitz(1.0);
        let base = ExactTilt::new(BaseModel::Discrete(
            DiscreteModel::uniform(vec![Vector::from_vec(vec![0.5])], 1.0).unwrap(),
        ));
        let mut rng = rng_from_seed(0);
        let al = KlAligner::new(&base, Matrix::identity(1, 1), f, &KlConfig::new(0.1, 0.05), &mut rng).unwrap();
        let mut stats = KlDiagnostics::default();
        assert!(matches!(al.draw(&mut rng, &mut stats), Err(Error::EnvelopeViolation(_))));
    }
}
