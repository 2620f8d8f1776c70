//! Property battery behind the `validate` command: envelope sandwich and
//! acceptance floor, the distance inequalities, and oracle consistency.

pub mod instances;

use rand::Rng;
use serde::Serialize;

use self::instances::{random_convex_lowrank, random_discrete, random_line_law, random_probs, random_psd};
use crate::error::{Error, Result};
use crate::kl::{build_envelope, build_net, Envelope, KlAligner, KlConfig, DEFAULT_NET_CAP};
use crate::linalg::{log_sum_exp, operator_norm, Vector};
use crate::metrics::{
    check_mixture_error, check_rejection_stability, check_tv_to_w2, check_w1_to_w2, check_weight_stability,
    oracle_kl_tilt, oracle_prox_grid, tv_discrete, w1_empirical, w2_empirical, EmpiricalLaw, InequalityCheck,
    MixtureInstance,
};
use crate::model::{BaseModel, DiscreteModel};
use crate::rewards::{LowDimFunction, RewardSpec};
use crate::rng::{derived_rng, uniform_in_ball, SimRng};
use crate::tilt::{tilt_exact, ExactTilt};
use crate::w2::{PgaProx, ProxOracle, QuadraticProx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Envelope,
    Lemmas,
    Oracles,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::All),
            "envelope" => Ok(Self::Envelope),
            "lemmas" => Ok(Self::Lemmas),
            "oracles" => Ok(Self::Oracles),
            other => Err(Error::Configuration(format!("suite: unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Smallest `rhs − lhs` seen (negative means a violation).
    pub worst_slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: &'static str,
    instances: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, instances: 0, violations: 0, worst: f64::INFINITY }
    }

    /// Records one inequality instance `lhs ≤ rhs + tol`.
    fn record(&mut self, lhs: f64, rhs: f64, tol: f64) {
        self.instances += 1;
        let slack = rhs - lhs;
        self.worst = self.worst.min(slack);
        if !(slack >= -tol) {
            self.violations += 1;
        }
    }

    fn record_check(&mut self, c: InequalityCheck) {
        self.instances += 1;
        self.worst = self.worst.min(c.slack());
        if !c.holds {
            self.violations += 1;
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.into(),
            instances: self.instances,
            violations: self.violations,
            worst_slack: self.worst,
            passed: self.violations == 0 && self.instances > 0,
        }
    }
}

/// Runs `suite` with generators seeded from `seed`.
pub fn run_validation(suite: Suite, seed: u64) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let mut stream = 0u64;
    let mut next_rng = || {
        stream += 1;
        derived_rng(seed, stream)
    };
    if matches!(suite, Suite::All | Suite::Envelope) {
        checks.push(envelope_sandwich(&mut next_rng(), 100, 1000)?);
        checks.push(acceptance_floor(&mut next_rng(), 20, 1000)?);
        checks.push(lse_self_reward(&mut next_rng(), 100)?);
        checks.push(softmax_bounds(&mut next_rng(), 1000));
        checks.push(proposal_identity(&mut next_rng(), 20)?);
    }
    if matches!(suite, Suite::All | Suite::Lemmas) {
        checks.push(tv_to_w2(&mut next_rng(), 200)?);
        checks.push(w1_to_w2(&mut next_rng(), 200)?);
        checks.push(weight_stability(&mut next_rng(), 200)?);
        checks.push(mixture_error(&mut next_rng(), 200)?);
        checks.push(rejection_stability(&mut next_rng(), 200)?);
    }
    if matches!(suite, Suite::All | Suite::Oracles) {
        checks.push(tilt_composition(&mut next_rng(), 100)?);
        checks.push(distance_axioms(&mut next_rng(), 100)?);
        checks.push(prox_grid_monotone(&mut next_rng(), 30)?);
        checks.push(prox_kkt(&mut next_rng(), 50)?);
        checks.push(prox_backend_agreement(&mut next_rng(), 50)?);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { suite, seed, passed, checks })
}

/// `f ≤ G ≤ f + 1 + log m` at random points of `B(R)`.
pub fn envelope_sandwich(rng: &mut SimRng, instances: usize, points: usize) -> Result<CheckResult> {
    let mut t = Tally::new("envelope_sandwich");
    for _ in 0..instances {
        let k = rng.random_range(1..=3);
        let (a, f) = random_convex_lowrank(rng, k + 1, k, 1.0, 2.0);
        let big_r = operator_norm(&a);
        let l = f.lipschitz().expect("max-affine");
        if l == 0.0 {
            continue;
        }
        let net = build_net(k, big_r, 1.0 / (2.0 * l), DEFAULT_NET_CAP)?;
        let env = build_envelope(&f, &net)?;
        for _ in 0..points {
            let u = uniform_in_ball(rng, k, big_r);
            let fu = f.value(&u)?;
            let g = env.value(&u);
            t.record(fu, g, 1e-9);
            t.record(g, fu + env.gap(), 1e-9);
        }
    }
    Ok(t.finish())
}

/// `a(x) ≥ a₀` on proposal draws of the envelope sampler.
pub fn acceptance_floor(rng: &mut SimRng, instances: usize, draws: usize) -> Result<CheckResult> {
    let mut t = Tally::new("acceptance_floor");
    for _ in 0..instances {
        let d = rng.random_range(1..=4);
        let k = rng.random_range(1..=2usize).min(d);
        let base = random_discrete(rng, 32, d, 1.0);
        let (a, f) = random_convex_lowrank(rng, d, k, 1.0, 2.0);
        let backend = ExactTilt::new(BaseModel::Discrete(base));
        let al = KlAligner::new(&backend, a, f, &KlConfig::new(0.1, 0.05), rng)?;
        let Some(p) = al.params().copied() else { continue };
        for _ in 0..draws {
            let x = al.propose(rng)?;
            t.record(p.a0, al.acceptance(&x)?, 1e-9);
        }
    }
    Ok(t.finish())
}

/// When `f` is itself `log Σ w_i e^{<z_i,u>}` and the envelope uses the
/// same pieces, acceptance is exactly `e^{−1}`.
pub fn lse_self_reward(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("lse_self_reward");
    for _ in 0..instances {
        let k = rng.random_range(1..=3);
        let m = rng.random_range(1..=8);
        let logs: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let slopes: Vec<Vector> = (0..m).map(|_| uniform_in_ball(rng, k, 2.0)).collect();
        let f = LowDimFunction::log_sum_exp_from_logs(logs.clone(), slopes.clone())?;
        let env = Envelope::from_pieces(logs, slopes)?;
        for _ in 0..100 {
            let u = uniform_in_ball(rng, k, 1.0);
            let dev = (env.acceptance(f.value(&u)?, &u) - (-1f64).exp()).abs();
            t.record(dev, 1e-12, 0.0);
        }
    }
    Ok(t.finish())
}

/// `max a ≤ log Σ e^a ≤ max a + log m`.
pub fn softmax_bounds(rng: &mut SimRng, instances: usize) -> CheckResult {
    let mut t = Tally::new("softmax_bounds");
    for _ in 0..instances {
        let m = rng.random_range(1..=50);
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let mx = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l = log_sum_exp(&a);
        let tol = 1e-12 * mx.abs().max(1.0);
        t.record(mx, l, tol);
        t.record(l, mx + (m as f64).ln(), tol);
    }
    t.finish()
}

/// The tilt of a discrete base by `e^{G(Ax)}` equals `Σ π_i P_{v_i}`
/// (exact normalisers), checked in TV.
pub fn proposal_identity(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("proposal_identity");
    for _ in 0..instances {
        let d = rng.random_range(1..=4);
        let k = rng.random_range(1..=2usize).min(d);
        let base = random_discrete(rng, 32, d, 1.0);
        let (a, f) = random_convex_lowrank(rng, d, k, 1.0, 2.0);
        let backend = ExactTilt::new(BaseModel::Discrete(base.clone()));
        let al = KlAligner::new(&backend, a.clone(), f, &KlConfig::new(0.1, 0.05), rng)?;
        let (Some(env), Some(prop)) = (al.envelope(), al.proposal()) else { continue };
        let mut mix = vec![0.0; base.atoms().len()];
        for (pi, v) in prop.weights.iter().zip(&prop.tilts) {
            let BaseModel::Discrete(q) = tilt_exact(&BaseModel::Discrete(base.clone()), v)? else {
                unreachable!("discrete tilts stay discrete")
            };
            for (m, p) in mix.iter_mut().zip(q.probs()) {
                *m += pi * p;
            }
        }
        let logs: Vec<f64> =
            base.atoms().iter().zip(base.probs()).map(|(x, p)| p.ln() + env.value(&(&a * x))).collect();
        let direct = DiscreteModel::from_log_weights(base.atoms().to_vec(), &logs, 1.0)?;
        let mixed = DiscreteModel::new(base.atoms().to_vec(), normalise(&mix), 1.0)?;
        t.record(tv_discrete(&direct, &mixed), 1e-10, 0.0);
    }
    Ok(t.finish())
}

fn normalise(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn shared_support_pair(rng: &mut SimRng, radius: f64) -> (EmpiricalLaw, EmpiricalLaw) {
    let n = rng.random_range(1..=8);
    let pts: Vec<Vector> = (0..n).map(|_| Vector::from_element(1, rng.random_range(-radius..=radius))).collect();
    let p = EmpiricalLaw::weighted(pts.clone(), random_probs(rng, n)).expect("valid");
    let q = EmpiricalLaw::weighted(pts, random_probs(rng, n)).expect("valid");
    (p, q)
}

fn law_tv(p: &EmpiricalLaw, q: &EmpiricalLaw) -> Result<f64> {
    let dm = |l: &EmpiricalLaw| DiscreteModel::new(l.points().to_vec(), l.weights().to_vec(), f64::MAX);
    Ok(tv_discrete(&dm(p)?, &dm(q)?))
}

pub fn tv_to_w2(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("tv_to_w2");
    for i in 0..instances {
        let c = rng.random_range(0.5..3.0);
        let (p, q) = if i % 2 == 0 {
            shared_support_pair(rng, c)
        } else {
            (random_line_law(rng, 6, c), random_line_law(rng, 6, c))
        };
        t.record_check(check_tv_to_w2(law_tv(&p, &q)?, c, w2_empirical(&p, &q)?));
    }
    Ok(t.finish())
}

pub fn w1_to_w2(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("w1_to_w2");
    for _ in 0..instances {
        let c = rng.random_range(0.5..3.0);
        let p = random_line_law(rng, 10, c);
        let q = random_line_law(rng, 10, c);
        t.record_check(check_w1_to_w2(w1_empirical(&p, &q)?, c, w2_empirical(&p, &q)?));
    }
    Ok(t.finish())
}

pub fn weight_stability(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("weight_stability");
    for _ in 0..instances {
        let m = rng.random_range(1..=20);
        let eta = rng.random_range(0.0..0.9);
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..10.0)).collect();
        // Extreme perturbations (all endpoints) are the worst case.
        let a_hat: Vec<f64> = a
            .iter()
            .map(|x| {
                let s = if rng.random::<f64>() < 0.5 {
                    rng.random_range(-1.0..=1.0)
                } else {
                    [-1.0, 1.0][rng.random_range(0..2)]
                };
                x * (1.0 + s * eta)
            })
            .collect();
        t.record_check(check_weight_stability(&a, &a_hat, eta)?);
    }
    Ok(t.finish())
}

fn shifted(rng: &mut SimRng, q: &EmpiricalLaw, by: f64, radius: f64) -> EmpiricalLaw {
    let pts = q
        .points()
        .iter()
        .map(|x| Vector::from_element(1, (x[0] + rng.random_range(-by..=by)).clamp(-radius, radius)))
        .collect();
    EmpiricalLaw::weighted(pts, q.weights().to_vec()).expect("valid")
}

pub fn mixture_error(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("mixture_error");
    for _ in 0..instances {
        let c = rng.random_range(0.5..2.0);
        let m = rng.random_range(1..=5);
        let parts: Vec<EmpiricalLaw> = (0..m).map(|_| random_line_law(rng, 5, c)).collect();
        let by = rng.random_range(0.0..0.3);
        let parts_hat = parts.iter().map(|q| shifted(rng, q, by, c)).collect();
        let pi = random_probs(rng, m);
        let pi_hat = if rng.random::<f64>() < 0.2 { pi.clone() } else { random_probs(rng, m) };
        t.record_check(check_mixture_error(&MixtureInstance { radius: c, pi, pi_hat, parts, parts_hat })?);
    }
    Ok(t.finish())
}

pub fn rejection_stability(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("rejection_stability");
    for _ in 0..instances {
        let c = rng.random_range(0.5..2.0);
        let q = random_line_law(rng, 8, c);
        let by = rng.random_range(0.0..0.5);
        let q_hat = shifted(rng, &q, by, c);
        let a0 = rng.random_range(0.05..0.9);
        let slope = rng.random_range(-2.0..2.0);
        let mid = rng.random_range(a0..=1.0);
        let a = move |x: &Vector| (mid + slope * x[0]).clamp(a0, 1.0);
        t.record_check(check_rejection_stability(&q, &q_hat, &a, a0, slope.abs(), c)?);
    }
    Ok(t.finish())
}

/// Tilting by `r₁` then `r₂` equals tilting by `r₁ + r₂`.
pub fn tilt_composition(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("tilt_composition");
    for _ in 0..instances {
        let d = rng.random_range(1..=4);
        let p = random_discrete(rng, 32, d, 1.0);
        let t1 = uniform_in_ball(rng, d, 3.0);
        let t2 = uniform_in_ball(rng, d, 3.0);
        let twice =
            oracle_kl_tilt(&oracle_kl_tilt(&p, &RewardSpec::linear(t1.clone()))?, &RewardSpec::linear(t2.clone()))?;
        let once = oracle_kl_tilt(&p, &RewardSpec::linear(t1 + t2))?;
        t.record(tv_discrete(&twice, &once), 1e-12, 0.0);
    }
    Ok(t.finish())
}

/// Symmetry and triangle inequality of TV, W1 and W2.
pub fn distance_axioms(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("distance_axioms");
    for i in 0..instances {
        let laws: Vec<EmpiricalLaw> = if i % 2 == 0 {
            (0..3).map(|_| random_line_law(rng, 8, 2.0)).collect()
        } else {
            let n = rng.random_range(1..=8);
            (0..3)
                .map(|_| EmpiricalLaw::uniform((0..n).map(|_| uniform_in_ball(rng, 2, 2.0)).collect()).expect("valid"))
                .collect()
        };
        type Dist = fn(&EmpiricalLaw, &EmpiricalLaw) -> Result<f64>;
        for dist in [w1_empirical as Dist, w2_empirical as Dist, law_tv as Dist] {
            let (ab, ba) = (dist(&laws[0], &laws[1])?, dist(&laws[1], &laws[0])?);
            t.record((ab - ba).abs(), 1e-9, 0.0);
            let (bc, ac) = (dist(&laws[1], &laws[2])?, dist(&laws[0], &laws[2])?);
            t.record(ac, ab + bc, 1e-9);
        }
    }
    Ok(t.finish())
}

fn random_concave_quadratic(rng: &mut SimRng, d: usize) -> Result<RewardSpec> {
    let b = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    let scale = rng.random_range(0.0..1.0);
    RewardSpec::quadratic(random_psd(rng, d, scale), b, 0.0)
}

/// Halving the grid oracle's resolution never lowers the value found.
pub fn prox_grid_monotone(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("prox_grid_monotone");
    for _ in 0..instances {
        let d = rng.random_range(1..=2);
        let r = random_concave_quadratic(rng, d)?;
        let y = uniform_in_ball(rng, d, 2.0);
        let lambda = rng.random_range(0.1..2.0);
        let mut res = 0.05;
        let mut last = f64::NEG_INFINITY;
        for _ in 0..4 {
            let v = oracle_prox_grid(&r, lambda, &y, 1.0, res)?.value;
            t.record(last, v, 0.0);
            last = v;
            res /= 2.0;
        }
    }
    Ok(t.finish())
}

/// Closed-form prox: KKT residual and optimality against feasible perturbations.
pub fn prox_kkt(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("prox_quadratic_kkt");
    for _ in 0..instances {
        let d = rng.random_range(1..=8);
        let scale = rng.random_range(0.0..1.0);
        let b_mat = random_psd(rng, d, scale);
        let b = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let lambda = rng.random_range(0.05..2.0);
        let c = rng.random_range(0.5..3.0);
        let y = uniform_in_ball(rng, d, 2.0 * c);
        let prox = QuadraticProx::new(b_mat.clone(), b.clone(), lambda, c)?;
        let s = prox.solve(&y)?;
        t.record(s.kkt_residual, 1e-9, 0.0);
        let obj = |x: &Vector| -x.dot(&(&b_mat * x)) + b.dot(x) - lambda * (x - &y).norm_squared();
        let best = obj(&s.x);
        for _ in 0..100 {
            let z = crate::linalg::project_ball(&(&s.x + uniform_in_ball(rng, d, 0.1)), c);
            t.record(obj(&z), best, 1e-12 * best.abs().max(1.0));
        }
    }
    Ok(t.finish())
}

/// Closed form against projected gradient ascent.
pub fn prox_backend_agreement(rng: &mut SimRng, instances: usize) -> Result<CheckResult> {
    let mut t = Tally::new("prox_backend_agreement");
    for _ in 0..instances {
        let d = rng.random_range(1..=8);
        let scale = rng.random_range(0.0..1.0);
        let b_mat = random_psd(rng, d, scale);
        let b = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let lambda = rng.random_range(0.05..2.0);
        let c = rng.random_range(0.5..3.0);
        let y = uniform_in_ball(rng, d, 2.0 * c);
        let exact = QuadraticProx::new(b_mat.clone(), b.clone(), lambda, c)?.prox(&y)?;
        let pga = PgaProx::new(RewardSpec::quadratic(b_mat, b, 0.0)?, lambda, c)?.prox(&y)?;
        t.record((exact - pga).norm(), 1e-6, 0.0);
    }
    Ok(t.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma_suite_passes() {
        let r = run_validation(Suite::Lemmas, 1).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
            assert_eq!(c.instances, 200);
        }
    }

    #[test]
    fn oracle_suite_passes() {
        let r = run_validation(Suite::Oracles, 2).unwrap();
        assert!(r.passed, "{:?}", r.checks);
    }
}
