use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rewardtilt::io::{parse_vector, write_json_atomic};
use rewardtilt::model::BaseModel;
use rewardtilt::pipeline::{
    estimate_z, prox_point, reproduce_fig1, run, AlignRunConfig, KlBackend, Method, ProxBackend,
};
use rewardtilt::rewards::RewardSpec;
use rewardtilt::tilt::NormalizerMethod;
use rewardtilt::validate::{run_validation, Suite};
use rewardtilt::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rewardtilt", version, about = "Reward-aligned sampling under KL and Wasserstein geometries")]
struct Cli {
    /// Random seed; identical seeds give identical outputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample q ∝ p·exp(r) for a convex low-rank reward.
    AlignKl(AlignArgs),
    /// Push base samples through the proximal transport map.
    AlignW2(AlignArgs),
    /// Estimate the normaliser E_p exp(<v, X>).
    EstimateZ(EstimateArgs),
    /// Print T_λ(y) for one query point.
    ProxDemo(ProxArgs),
    /// Run the property battery and print a JSON report.
    Validate(ValidateArgs),
    /// Regenerate the two-mode example under both geometries.
    ReproduceFig1(Fig1Args),
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    reward: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Transport cost weight (align-w2).
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// exact|diffusion for align-kl; quad|pga|lowrank for align-w2.
    #[arg(long)]
    backend: Option<String>,
    /// Base sampler for align-w2 (exact|diffusion).
    #[arg(long, default_value = "exact")]
    sampler: String,
    /// Normaliser estimator (exact|mc|annealed).
    #[arg(long)]
    normalizer: Option<String>,
    /// Lower bound on the normaliser accuracy the KL sampler requests.
    #[arg(long)]
    eta_floor: Option<f64>,
    /// Cap on reverse-diffusion steps per draw.
    #[arg(long, default_value_t = 2000)]
    max_steps: usize,
    /// Cap on draws spent on each normaliser.
    #[arg(long, default_value_t = 50_000_000)]
    max_normalizer_samples: u64,
    /// Cap on net size.
    #[arg(long, default_value_t = 1_000_000)]
    net_cap: usize,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Tilt vector, e.g. "1.0,0.0".
    #[arg(long, allow_hyphen_values = true)]
    v: String,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// exact|mc|annealed
    #[arg(long, default_value = "exact")]
    method: String,
    /// exact|diffusion
    #[arg(long, default_value = "exact")]
    backend: String,
    #[arg(long, default_value_t = 2000)]
    max_steps: usize,
    #[arg(long, default_value_t = 50_000_000)]
    max_samples: u64,
}

#[derive(Args)]
struct ProxArgs {
    #[arg(long)]
    reward: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// Query point, e.g. "0.0,0.5".
    #[arg(long, allow_hyphen_values = true)]
    y: String,
    /// Support radius C.
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    /// quad|pga|lowrank; chosen from the reward type when omitted.
    #[arg(long)]
    backend: Option<String>,
    /// Objective accuracy for the lowrank net.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Args)]
struct ValidateArgs {
    /// all|envelope|lemmas|oracles
    #[arg(long, default_value = "all")]
    suite: String,
}

#[derive(Args)]
struct Fig1Args {
    #[arg(long, default_value_t = 100_000)]
    n: usize,
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn align(cli: &Cli, args: &AlignArgs, method: Method) -> Result<()> {
    let out = cli.out.clone().ok_or_else(|| Error::Configuration("out: an output directory is required".into()))?;
    let mut cfg = AlignRunConfig::new(args.model.clone(), args.reward.clone(), method, out);
    cfg.eps = args.eps;
    cfg.delta = args.delta;
    cfg.lambda = args.lambda;
    cfg.n = args.n;
    cfg.seed = cli.seed;
    cfg.threads = cli.threads;
    cfg.eta_floor = args.eta_floor;
    cfg.max_steps = args.max_steps;
    cfg.max_normalizer_samples = args.max_normalizer_samples;
    cfg.net_cap = args.net_cap;
    cfg.normalizer = args.normalizer.as_deref().map(str::parse::<NormalizerMethod>).transpose()?;
    match method {
        Method::Kl => cfg.sampler = args.backend.as_deref().unwrap_or("exact").parse()?,
        Method::W2 => {
            cfg.prox = args.backend.as_deref().unwrap_or("quad").parse()?;
            cfg.sampler = args.sampler.parse()?;
        }
    }
    let outcome = run(&cfg)?;
    print_json(&json!({
        "out": outcome.out_dir,
        "outputs": outcome.manifest.outputs,
        "diagnostics": outcome.manifest.diagnostics,
    }))
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::AlignKl(a) => align(cli, a, Method::Kl),
        Command::AlignW2(a) => align(cli, a, Method::W2),
        Command::EstimateZ(a) => {
            let model = BaseModel::from_json(&read(&a.model)?)?;
            let v = parse_vector(&a.v)?;
            let est = estimate_z(
                &model,
                &v,
                a.eta,
                a.delta,
                a.method.parse()?,
                a.backend.parse::<KlBackend>()?,
                a.max_steps,
                a.max_samples,
                cli.seed,
            )?;
            print_json(&serde_json::to_value(est)?)
        }
        Command::ProxDemo(a) => {
            let reward = RewardSpec::from_json(&read(&a.reward)?)?;
            let y = parse_vector(&a.y)?;
            let backend = a.backend.as_deref().map(str::parse::<ProxBackend>).transpose()?;
            let (x, value, name) = prox_point(&reward, a.lambda, &y, a.radius, backend, a.eps)?;
            print_json(&json!({ "y": y.as_slice(), "x": x.as_slice(), "value": value, "backend": name }))
        }
        Command::Validate(a) => {
            let report = run_validation(a.suite.parse::<Suite>()?, cli.seed)?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                write_json_atomic(&dir.join("validation.json"), &report)?;
            }
            print_json(&serde_json::to_value(&report)?)?;
            if report.passed {
                Ok(())
            } else {
                Err(Error::Numerical("property battery reported violations".into()))
            }
        }
        Command::ReproduceFig1(a) => {
            let summary = reproduce_fig1(cli.seed, a.n, cli.out.as_deref())?;
            print_json(&serde_json::to_value(&summary)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
