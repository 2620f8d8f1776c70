use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use serde_json::json;

use super::{sha256_hex, OutputDir, RunManifest};
use crate::error::{Error, Result};
use crate::io::{paired_csv, samples_csv, write_atomic, write_json_atomic};
use crate::linalg::{Matrix, Vector};
use crate::model::{BaseModel, GaussianMixtureModel};
use crate::rewards::RewardSpec;
use crate::rng::{derived_rng, SimRng};
use crate::w2::{objective_value, CoupledBatch, QuadraticProx};

pub const FIG1_LAMBDA: f64 = 0.15;
pub const FIG1_RADIUS: f64 = 8.0;
const HIST_RANGE: (f64, f64) = (-6.0, 6.0);
const HIST_BINS: usize = 120;

/// `½N(−2, 0.7²) + ½N(2, 0.7²)` supported in `[−8, 8]`.
pub fn fig1_model() -> BaseModel {
    let cov = Matrix::from_element(1, 1, 0.49);
    BaseModel::Gmm(
        GaussianMixtureModel::new(
            vec![0.5, 0.5],
            vec![Vector::from_element(1, -2.0), Vector::from_element(1, 2.0)],
            vec![cov.clone(), cov],
            FIG1_RADIUS,
        )
        .expect("valid mixture"),
    )
}

/// `r(x) = −0.15(x − 2)²`.
pub fn fig1_reward() -> RewardSpec {
    RewardSpec::quadratic(Matrix::from_element(1, 1, 0.15), Vector::from_element(1, 0.6), -0.6).expect("valid reward")
}

/// One-dimensional tilt `∝ p(x)·exp(r(x))` tabulated on a uniform grid
/// and sampled by inverting the trapezoidal CDF.
#[derive(Debug, Clone)]
pub struct QuadratureTilt {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuadratureTilt {
    pub fn new(model: &BaseModel, reward: &RewardSpec, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if model.dim() != 1 || reward.dim() != 1 {
            return Err(Error::Capability("quadrature tilt is one-dimensional".into()));
        }
        if !(lo < hi) || cells < 2 {
            return Err(Error::invalid("quadrature needs lo < hi and at least 2 cells"));
        }
        let BaseModel::Gmm(gmm) = model else {
            return Err(Error::Capability("quadrature tilt needs a density".into()));
        };
        let step = (hi - lo) / cells as f64;
        let xs: Vec<f64> = (0..=cells).map(|i| lo + i as f64 * step).collect();
        let logs = xs
            .iter()
            .map(|&x| {
                let v = Vector::from_element(1, x);
                Ok(gmm.mixture().log_density(&v)? + reward.eval(&v)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let mut cdf = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            cdf[i] = cdf[i - 1] + 0.5 * step * (dens[i - 1] + dens[i]);
        }
        let total = cdf[cdf.len() - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self { xs, cdf })
    }

    /// Tilted mass of `(−∞, t]`.
    pub fn cdf_at(&self, t: f64) -> f64 {
        if t <= self.xs[0] {
            return 0.0;
        }
        let i = self.xs.partition_point(|&x| x <= t);
        if i >= self.xs.len() {
            return 1.0;
        }
        let w = (t - self.xs[i - 1]) / (self.xs[i] - self.xs[i - 1]);
        self.cdf[i - 1] + w * (self.cdf[i] - self.cdf[i - 1])
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let w = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
        self.xs[i - 1] + w * (self.xs[i] - self.xs[i - 1])
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeMass {
    pub left: f64,
    pub right: f64,
}

fn mode_mass(xs: &[f64]) -> ModeMass {
    let right = xs.iter().filter(|x| **x > 0.0).count() as f64 / xs.len().max(1) as f64;
    ModeMass { left: 1.0 - right, right }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig1Summary {
    pub n: usize,
    pub seed: u64,
    pub base: ModeMass,
    pub kl: ModeMass,
    pub kl_quadrature_right_mass: f64,
    pub w2: ModeMass,
    pub w2_objective: f64,
    pub w2_objective_std_err: f64,
    pub max_map_deviation: f64,
    #[serde(skip)]
    pub base_samples: Vec<f64>,
    #[serde(skip)]
    pub kl_samples: Vec<f64>,
    #[serde(skip)]
    pub w2_samples: Vec<f64>,
}

fn histogram(xs: &[f64]) -> Vec<f64> {
    let (lo, hi) = HIST_RANGE;
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = vec![0usize; HIST_BINS];
    for &x in xs {
        if x >= lo && x < hi {
            counts[((x - lo) / width) as usize] += 1;
        }
    }
    counts.iter().map(|&c| c as f64 / (xs.len() as f64 * width)).collect()
}

/// The two-mode example under both geometries. The KL panel uses the
/// quadrature tilt (the reward is concave, outside the envelope sampler's
/// scope); the W2 panel pushes base draws through `T(y) = 1 + y/2`.
///
/// With `out`, writes `fig1_base.csv`, `fig1_kl.csv`, `fig1_w2.csv`,
/// `fig1_hist.json` and `manifest.json`.
pub fn reproduce_fig1(seed: u64, n: usize, out: Option<&Path>) -> Result<Fig1Summary> {
    if n == 0 {
        return Err(Error::Configuration("n: must be at least 1".into()));
    }
    let start = Instant::now();
    let model = fig1_model();
    let reward = fig1_reward();
    let base = model.sample_exact(n, seed)?.points;

    let quad = QuadratureTilt::new(&model, &reward, -FIG1_RADIUS, FIG1_RADIUS, 160_000)?;
    let mut rng = derived_rng(seed, 1);
    let kl: Vec<f64> = (0..n).map(|_| quad.sample(&mut rng)).collect();

    let prox =
        QuadraticProx::new(Matrix::from_element(1, 1, 0.15), Vector::from_element(1, 0.6), FIG1_LAMBDA, FIG1_RADIUS)?;
    let w2 = base.iter().map(|y| Ok(prox.solve(y)?.x)).collect::<Result<Vec<Vector>>>()?;
    let max_map_deviation = base.iter().zip(&w2).map(|(y, x)| (x[0] - (1.0 + y[0] / 2.0)).abs()).fold(0.0, f64::max);
    let batch = CoupledBatch { ys: base.clone(), xs: w2 };
    let obj = objective_value(&batch, &reward, FIG1_LAMBDA)?;

    let flat = |v: &[Vector]| v.iter().map(|p| p[0]).collect::<Vec<f64>>();
    let base_samples = flat(&base);
    let w2_samples = flat(&batch.xs);
    let summary = Fig1Summary {
        n,
        seed,
        base: mode_mass(&base_samples),
        kl: mode_mass(&kl),
        kl_quadrature_right_mass: 1.0 - quad.cdf_at(0.0),
        w2: mode_mass(&w2_samples),
        w2_objective: obj.mean,
        w2_objective_std_err: obj.std_err,
        max_map_deviation,
        base_samples,
        kl_samples: kl,
        w2_samples,
    };

    if let Some(dir) = out {
        let out = OutputDir::claim(dir)?;
        let kl_points: Vec<Vector> = summary.kl_samples.iter().map(|x| Vector::from_element(1, *x)).collect();
        write_atomic(&out.file("fig1_base.csv"), samples_csv(&batch.ys).as_bytes())?;
        write_atomic(&out.file("fig1_kl.csv"), samples_csv(&kl_points).as_bytes())?;
        write_atomic(&out.file("fig1_w2.csv"), paired_csv(&batch.ys, &batch.xs).as_bytes())?;
        let (lo, hi) = HIST_RANGE;
        let edges: Vec<f64> = (0..=HIST_BINS).map(|i| lo + (hi - lo) * i as f64 / HIST_BINS as f64).collect();
        write_json_atomic(
            &out.file("fig1_hist.json"),
            &json!({
                "edges": edges,
                "density": {
                    "base": histogram(&summary.base_samples),
                    "kl": histogram(&summary.kl_samples),
                    "w2": histogram(&summary.w2_samples),
                },
                "mode_mass": { "base": summary.base, "kl": summary.kl, "w2": summary.w2 },
            }),
        )?;
        let config = json!({ "seed": seed, "n": n, "lambda": FIG1_LAMBDA, "C": FIG1_RADIUS });
        let mut manifest =
            RunManifest::new("reproduce-fig1", config.clone(), sha256_hex(config.to_string().as_bytes()));
        manifest.derived = json!({
            "base": "0.5 N(-2, 0.49) + 0.5 N(2, 0.49)",
            "reward": "-0.15 (x - 2)^2",
            "kl_sampler": "oracle",
            "kl_oracle": "trapezoidal quadrature on [-8, 8] with 160000 cells, inverse-CDF sampling",
            "w2_sampler": "quad",
            "transport_map": "1 + y/2",
        });
        manifest.diagnostics = serde_json::to_value(&summary)?;
        manifest.outputs = ["fig1_base.csv", "fig1_kl.csv", "fig1_w2.csv", "fig1_hist.json", "manifest.json"]
            .map(String::from)
            .to_vec();
        manifest.wall_clock_secs = start.elapsed().as_secs_f64();
        write_json_atomic(&out.file("manifest.json"), &manifest)?;
    }
    Ok(summary)
}
