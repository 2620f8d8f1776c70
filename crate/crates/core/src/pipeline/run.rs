use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parallel_chunks, sha256_hex, OutputDir};
use crate::error::{check_dim, Error, Result};
use crate::io::{paired_csv, samples_csv, write_atomic, write_json_atomic};
use crate::kl::{KlAligner, KlConfig, KlDiagnostics, DEFAULT_NET_CAP};
use crate::linalg::{operator_norm, Matrix, Vector};
use crate::model::BaseModel;
use crate::rewards::{RewardKind, RewardSpec};
use crate::rng::{derived_rng, SimRng};
use crate::tilt::{
    estimate_normalizer, DiffusionTilt, ExactTilt, LinearTiltPrimitive, NormalizerConfig, NormalizerEstimate,
    NormalizerMethod, TiltVector, TiltedSampler,
};
use crate::w2::{objective_value, CoupledBatch, LowRankProx, PgaProx, ProxOracle, QuadraticProx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kl,
    W2,
}

/// Source of linear tilts and base draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KlBackend {
    Exact,
    Diffusion,
}

impl std::str::FromStr for KlBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "diffusion" => Ok(Self::Diffusion),
            other => Err(Error::Configuration(format!("backend: unknown sampler backend {other:?} (exact|diffusion)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxBackend {
    Quad,
    Pga,
    Lowrank,
}

impl std::str::FromStr for ProxBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quad" => Ok(Self::Quad),
            "pga" => Ok(Self::Pga),
            "lowrank" => Ok(Self::Lowrank),
            other => Err(Error::Configuration(format!("backend: unknown prox backend {other:?} (quad|pga|lowrank)"))),
        }
    }
}

/// Everything that determines a run. `out` and `threads` do not affect
/// results and are left out of the configuration hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignRunConfig {
    pub model: PathBuf,
    pub reward: PathBuf,
    pub method: Method,
    /// Transport cost weight (W2 only; KL runs fold temperature into the reward).
    pub lambda: f64,
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub seed: u64,
    /// Sampler backend for base draws and tilts.
    pub sampler: KlBackend,
    /// Proximal backend (W2 only).
    pub prox: ProxBackend,
    /// Normaliser estimator; defaults to `exact` for the exact sampler and
    /// `mc` otherwise.
    pub normalizer: Option<NormalizerMethod>,
    /// Floor on the normaliser accuracy requested by the KL sampler.
    pub eta_floor: Option<f64>,
    pub max_steps: usize,
    pub max_normalizer_samples: u64,
    pub net_cap: usize,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: usize,
}

impl AlignRunConfig {
    pub fn new(model: PathBuf, reward: PathBuf, method: Method, out: PathBuf) -> Self {
        Self {
            model,
            reward,
            method,
            lambda: 1.0,
            eps: 0.1,
            delta: 0.05,
            n: 1000,
            seed: 0,
            sampler: KlBackend::Exact,
            prox: ProxBackend::Quad,
            normalizer: None,
            eta_floor: None,
            max_steps: 2000,
            max_normalizer_samples: 50_000_000,
            net_cap: DEFAULT_NET_CAP,
            out,
            threads: 1,
        }
    }

    /// Field-level checks, run before anything is written.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Configuration(format!("{field}: {msg}")));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad("eps", format!("must lie in (0, 1), got {}", self.eps));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", format!("must lie in (0, 1), got {}", self.delta));
        }
        if self.n == 0 {
            return bad("n", "must be at least 1".into());
        }
        if self.method == Method::W2 && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda", format!("must be positive, got {}", self.lambda));
        }
        if let Some(f) = self.eta_floor {
            if !(f > 0.0 && f < 1.0) {
                return bad("eta_floor", format!("must lie in (0, 1), got {f}"));
            }
        }
        if self.max_steps < 2 {
            return bad("max_steps", format!("must be at least 2, got {}", self.max_steps));
        }
        if self.threads == 0 {
            return bad("threads", "must be at least 1".into());
        }
        Ok(())
    }

    fn normalizer_method(&self) -> NormalizerMethod {
        self.normalizer.unwrap_or(match self.sampler {
            KlBackend::Exact => NormalizerMethod::Exact,
            KlBackend::Diffusion => NormalizerMethod::Mc,
        })
    }
}

/// Record written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: Value,
    pub derived: Value,
    pub diagnostics: Value,
    pub outputs: Vec<String>,
    pub wall_clock_secs: f64,
}

impl RunManifest {
    pub(crate) fn new(command: &str, config: Value, hash: String) -> Self {
        Self {
            tool: "rewardtilt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: hash,
            config,
            derived: Value::Null,
            diagnostics: Value::Null,
            outputs: Vec::new(),
            wall_clock_secs: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

struct Inputs {
    model: BaseModel,
    reward: RewardSpec,
    hash: String,
    config: Value,
}

fn read_file(path: &Path, what: &str) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Configuration(format!("{what}: cannot read {}: {e}", path.display())))
}

fn load_inputs(cfg: &AlignRunConfig) -> Result<Inputs> {
    cfg.validate()?;
    let model_text = read_file(&cfg.model, "model")?;
    let reward_text = read_file(&cfg.reward, "reward")?;
    let model = BaseModel::from_json(&model_text)?;
    let reward = RewardSpec::from_json(&reward_text)?;
    check_dim(model.dim(), reward.dim())?;
    let config = serde_json::to_value(cfg)?;
    let hash = sha256_hex(
        serde_json::to_string(&json!({ "config": config, "model": model_text, "reward": reward_text }))?.as_bytes(),
    );
    Ok(Inputs { model, reward, hash, config })
}

/// Dispatches on `cfg.method`.
pub fn run(cfg: &AlignRunConfig) -> Result<RunOutcome> {
    match cfg.method {
        Method::Kl => run_kl(cfg),
        Method::W2 => run_w2(cfg),
    }
}

fn tilt_backend(model: &BaseModel, cfg: &AlignRunConfig) -> Box<dyn LinearTiltPrimitive> {
    match cfg.sampler {
        KlBackend::Exact => Box::new(ExactTilt::new(model.clone())),
        KlBackend::Diffusion => {
            let mut d = DiffusionTilt::new(Arc::new(model.clone()));
            d.max_steps = cfg.max_steps;
            Box::new(d)
        }
    }
}

fn steps_info(model: &BaseModel, cfg: &AlignRunConfig, eps: f64) -> Value {
    match cfg.sampler {
        KlBackend::Exact => Value::Null,
        KlBackend::Diffusion => {
            let mut d = DiffusionTilt::new(Arc::new(model.clone()));
            d.max_steps = cfg.max_steps;
            let (steps, clipped) = d.steps_for(eps);
            json!({ "target_eps": eps, "steps": steps, "clipped": clipped })
        }
    }
}

/// KL-aligned samples `∝ p·exp(r)`; writes `samples.csv`, `envelope.json`
/// (unless `r` is constant) and `manifest.json`.
pub fn run_kl(cfg: &AlignRunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let inputs = load_inputs(cfg)?;
    if cfg.method != Method::Kl {
        return Err(Error::Configuration("method: run_kl needs method = kl".into()));
    }
    let (a, mut f) = inputs.reward.low_rank_view()?;
    let big_r = operator_norm(&a) * inputs.model.radius();
    if f.radius().is_none() {
        f = f.with_radius(big_r);
    }
    let backend = tilt_backend(&inputs.model, cfg);
    let kl_cfg = KlConfig {
        eps: cfg.eps,
        delta: cfg.delta,
        normalizer: NormalizerConfig {
            method: cfg.normalizer_method(),
            max_samples: cfg.max_normalizer_samples,
            ..NormalizerConfig::default()
        },
        net_cap: cfg.net_cap,
        eta_floor: cfg.eta_floor,
    };
    let aligner = KlAligner::new(&*backend, a, f, &kl_cfg, &mut derived_rng(cfg.seed, 0))?;
    let results = parallel_chunks(cfg.n, cfg.seed, cfg.threads, |rng: &mut SimRng, count| {
        let (pts, stats) = aligner.sample_n(count, rng)?;
        Ok(vec![(pts, stats)])
    })?;
    let mut stats = KlDiagnostics::default();
    let mut points = Vec::with_capacity(cfg.n);
    for (pts, s) in results {
        stats.merge(&s);
        points.extend(pts);
    }

    let out = OutputDir::claim(&cfg.out)?;
    let mut manifest = RunManifest::new("align-kl", inputs.config, inputs.hash);
    write_atomic(&out.file("samples.csv"), samples_csv(&points).as_bytes())?;
    manifest.outputs.push("samples.csv".into());
    manifest.derived = match aligner.params() {
        None => json!({ "l_zero_branch": true, "note": "constant reward: draws come from the base law" }),
        Some(p) => {
            let env = aligner.envelope().expect("prepared");
            write_json_atomic(&out.file("envelope.json"), &env.dump())?;
            manifest.outputs.push("envelope.json".into());
            json!({
                "l_zero_branch": false,
                "params": p,
                "net_size": p.m,
                "net_volumetric_bound": aligner.net_volumetric_bound(),
                "eta_used": aligner.eta_used(),
                "normalizer": kl_cfg.normalizer.method,
                "normalizer_samples": aligner.proposal().map(|q| q.normalizers.iter().map(|z| z.samples).sum::<u64>()),
                "proposal_diffusion": steps_info(&inputs.model, cfg, p.eps_lin),
                "fallback_diffusion": steps_info(&inputs.model, cfg, cfg.eps),
            })
        }
    };
    manifest.diagnostics = json!({
        "draws": stats.draws,
        "trials": stats.trials,
        "accepted": stats.accepted,
        "acceptance_rate": if stats.trials > 0 { json!(stats.acceptance_rate()) } else { Value::Null },
        "fallback_count": stats.fallbacks,
        "min_acceptance": if stats.trials > 0 { json!(stats.min_acceptance) } else { Value::Null },
    });
    manifest.outputs.push("manifest.json".into());
    manifest.wall_clock_secs = start.elapsed().as_secs_f64();
    write_json_atomic(&out.file("manifest.json"), &manifest)?;
    Ok(RunOutcome { manifest, out_dir: cfg.out.clone() })
}

/// Proximal oracle for `reward`, with the net parameters when the lowrank
/// backend is chosen.
pub fn build_prox(
    reward: &RewardSpec,
    backend: ProxBackend,
    lambda: f64,
    radius: f64,
    eps: f64,
    net_cap: usize,
) -> Result<(Box<dyn ProxOracle>, Value)> {
    match backend {
        ProxBackend::Quad => {
            let (b_mat, b) = match &reward.kind {
                RewardKind::Quadratic { b_mat, b, .. } => (b_mat.clone(), b.clone()),
                RewardKind::Linear { theta } => (Matrix::zeros(theta.len(), theta.len()), theta.clone()),
                RewardKind::LowRank { .. } => {
                    return Err(Error::Configuration(
                        "backend: quad needs a linear or quadratic reward; use pga or lowrank".into(),
                    ))
                }
            };
            Ok((Box::new(QuadraticProx::new(b_mat, b, lambda, radius)?), Value::Null))
        }
        ProxBackend::Pga => Ok((Box::new(PgaProx::new(reward.clone(), lambda, radius)?), Value::Null)),
        ProxBackend::Lowrank => {
            let (a, mut f) = reward.low_rank_view()?;
            let s = operator_norm(&a);
            if f.radius().is_none() {
                f = f.with_radius(s * radius);
            }
            let p = LowRankProx::with_cap(&a, &f, lambda, radius, eps, net_cap)?;
            let params = serde_json::to_value(p.params())?;
            Ok((Box::new(p), params))
        }
    }
}

/// W2-aligned samples: base draws `y` and `T_λ(y)`; writes `samples.csv`
/// (columns `y*` then `x*`) and `manifest.json`.
pub fn run_w2(cfg: &AlignRunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let inputs = load_inputs(cfg)?;
    if cfg.method != Method::W2 {
        return Err(Error::Configuration("method: run_w2 needs method = w2".into()));
    }
    let radius = inputs.model.radius();
    let (prox, alg2) = build_prox(&inputs.reward, cfg.prox, cfg.lambda, radius, cfg.eps, cfg.net_cap)?;
    let eps_p = alg2.get("eps_p").and_then(Value::as_f64).unwrap_or(cfg.eps);
    let backend = tilt_backend(&inputs.model, cfg);
    let base: Box<dyn TiltedSampler> = backend.prepare(&TiltVector::zeros(inputs.model.dim()), eps_p)?;
    let pairs = parallel_chunks(cfg.n, cfg.seed, cfg.threads, |rng: &mut SimRng, count| {
        let b = crate::w2::sample_w2_aligned(&*base, &*prox, count, rng)?;
        Ok(b.ys.into_iter().zip(b.xs).collect())
    })?;
    let (ys, xs): (Vec<Vector>, Vec<Vector>) = pairs.into_iter().unzip();
    let batch = CoupledBatch { ys, xs };
    let obj = objective_value(&batch, &inputs.reward, cfg.lambda)?;

    let out = OutputDir::claim(&cfg.out)?;
    let mut manifest = RunManifest::new("align-w2", inputs.config, inputs.hash);
    write_atomic(&out.file("samples.csv"), paired_csv(&batch.ys, &batch.xs).as_bytes())?;
    manifest.outputs.push("samples.csv".into());
    manifest.derived = json!({
        "prox_backend": prox.name(),
        "alg2": alg2,
        "base_diffusion": steps_info(&inputs.model, cfg, eps_p),
    });
    manifest.diagnostics = json!({
        "objective_value": obj.mean,
        "objective_std_err": obj.std_err,
        "n": obj.n,
    });
    manifest.outputs.push("manifest.json".into());
    manifest.wall_clock_secs = start.elapsed().as_secs_f64();
    write_json_atomic(&out.file("manifest.json"), &manifest)?;
    Ok(RunOutcome { manifest, out_dir: cfg.out.clone() })
}

/// `Z_P(v)` for the base model with the chosen estimator and sampler.
#[allow(clippy::too_many_arguments)]
pub fn estimate_z(
    model: &BaseModel,
    v: &Vector,
    eta: f64,
    delta: f64,
    method: NormalizerMethod,
    sampler: KlBackend,
    max_steps: usize,
    max_samples: u64,
    seed: u64,
) -> Result<NormalizerEstimate> {
    let mut cfg = AlignRunConfig::new(PathBuf::new(), PathBuf::new(), Method::Kl, PathBuf::new());
    cfg.sampler = sampler;
    cfg.max_steps = max_steps;
    let backend = tilt_backend(model, &cfg);
    let ncfg = NormalizerConfig { method, max_samples, ..NormalizerConfig::default() };
    estimate_normalizer(&*backend, &TiltVector::new(v.clone())?, eta, delta, &ncfg, &mut derived_rng(seed, 0))
}

/// `T_λ(y)` and the attained value `r(x) − λ‖x − y‖²`. Without an explicit
/// backend, quadratic and linear rewards use the closed form and others the
/// net search.
pub fn prox_point(
    reward: &RewardSpec,
    lambda: f64,
    y: &Vector,
    radius: f64,
    backend: Option<ProxBackend>,
    eps: f64,
) -> Result<(Vector, f64, &'static str)> {
    if !(lambda > 0.0) {
        return Err(Error::Configuration(format!("lambda: must be positive, got {lambda}")));
    }
    check_dim(reward.dim(), y.len())?;
    let backend = backend.unwrap_or(match reward.kind {
        RewardKind::LowRank { .. } => ProxBackend::Lowrank,
        _ => ProxBackend::Quad,
    });
    let (prox, _) = build_prox(reward, backend, lambda, radius, eps, DEFAULT_NET_CAP)?;
    let x = prox.prox(y)?;
    let value = reward.eval(&x)? - lambda * (&x - y).norm_squared();
    Ok((x, value, prox.name()))
}
