use proptest::prelude::*;

use rewardtilt::io::parse_vector;
use rewardtilt::kl::{build_envelope, build_net, DEFAULT_NET_CAP};
use rewardtilt::linalg::{log_sum_exp, project_ball, softmax};
use rewardtilt::metrics::{w1_empirical, w2_empirical, wasserstein_1d, EmpiricalLaw};
use rewardtilt::model::DiscreteModel;
use rewardtilt::rewards::LowDimFunction;
use rewardtilt::w2::QuadraticProx;
use rewardtilt::{Matrix, Vector};

fn vec_in(d: usize, r: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-r..r, d).prop_map(Vector::from_vec)
}

fn max_affine(k: usize) -> impl Strategy<Value = LowDimFunction> {
    prop::collection::vec((vec_in(k, 2.0), -1.0..1.0f64), 1..6)
        .prop_map(|pieces| LowDimFunction::max_affine(pieces).unwrap())
}

fn line_law() -> impl Strategy<Value = EmpiricalLaw> {
    prop::collection::vec(-3.0..3.0f64, 1..8)
        .prop_map(|xs| EmpiricalLaw::uniform(xs.into_iter().map(|x| Vector::from_element(1, x)).collect()).unwrap())
}

proptest! {
    #[test]
    fn subgradient_inequality(f in max_affine(2), u in vec_in(2, 3.0), w in vec_in(2, 3.0)) {
        let (fu, g) = f.first_order(&u).unwrap();
        let fw = f.value(&w).unwrap();
        prop_assert!(fw >= fu + g.dot(&(&w - &u)) - 1e-12);
    }

    #[test]
    fn declared_lipschitz_bound(f in max_affine(3), u in vec_in(3, 3.0), w in vec_in(3, 3.0)) {
        let l = f.lipschitz().unwrap();
        let gap = (f.value(&u).unwrap() - f.value(&w).unwrap()).abs();
        prop_assert!(gap <= l * (&u - &w).norm() + 1e-12);
    }

    #[test]
    fn envelope_sandwiches_reward(f in max_affine(1), u in -1.0..1.0f64) {
        let l = f.lipschitz().unwrap();
        prop_assume!(l > 0.0);
        let net = build_net(1, 1.0, 1.0 / (2.0 * l), DEFAULT_NET_CAP).unwrap();
        let env = build_envelope(&f, &net).unwrap();
        let u = Vector::from_element(1, u);
        let (fu, g) = (f.value(&u).unwrap(), env.value(&u));
        prop_assert!(fu <= g + 1e-9);
        prop_assert!(g <= fu + env.gap() + 1e-9);
    }

    #[test]
    fn tilts_compose(
        xs in prop::collection::vec(vec_in(2, 1.0), 1..10),
        v1 in vec_in(2, 2.0),
        v2 in vec_in(2, 2.0),
    ) {
        let xs: Vec<Vector> = xs.into_iter().map(|x| project_ball(&x, 1.0)).collect();
        let p = DiscreteModel::uniform(xs, 1.0).unwrap();
        let two_step = p.tilt(&v1).unwrap().tilt(&v2).unwrap();
        let one_step = p.tilt(&(&v1 + &v2)).unwrap();
        for (a, b) in two_step.probs().iter().zip(one_step.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let lz = p.log_normalizer(&(&v1 + &v2)).unwrap();
        let split = p.log_normalizer(&v1).unwrap() + p.tilt(&v1).unwrap().log_normalizer(&v2).unwrap();
        prop_assert!((lz - split).abs() < 1e-10);
    }

    #[test]
    fn softmax_and_lse(a in prop::collection::vec(-50.0..50.0f64, 1..30)) {
        let s = softmax(&a);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mx = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l = log_sum_exp(&a);
        prop_assert!(mx <= l + 1e-12 && l <= mx + (a.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn wasserstein_is_a_metric(p in line_law(), q in line_law(), r in line_law()) {
        let pq = w2_empirical(&p, &q).unwrap();
        prop_assert!((pq - w2_empirical(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!(w2_empirical(&p, &p).unwrap() < 1e-12);
        let via = w2_empirical(&p, &r).unwrap() + w2_empirical(&r, &q).unwrap();
        prop_assert!(pq <= via + 1e-12);
        prop_assert!(w1_empirical(&p, &q).unwrap() <= pq + 1e-12);
    }

    #[test]
    fn line_and_plane_solvers_agree(a in prop::collection::vec(-2.0..2.0f64, 1..6), shift in -1.0..1.0f64) {
        let b: Vec<f64> = a.iter().rev().map(|x| x * 0.5 + shift).collect();
        let w = vec![1.0 / a.len() as f64; a.len()];
        let line = wasserstein_1d(&a, &w, &b, &w, 2.0);
        let lift = |xs: &[f64]| EmpiricalLaw::uniform(xs.iter().map(|x| Vector::from_vec(vec![*x, 0.0])).collect()).unwrap();
        let plane = w2_empirical(&lift(&a), &lift(&b)).unwrap();
        prop_assert!((line - plane).abs() < 1e-9);
    }

    #[test]
    fn projection_is_idempotent(x in vec_in(4, 5.0), r in 0.1..3.0f64) {
        let p = project_ball(&x, r);
        prop_assert!(p.norm() <= r * (1.0 + 1e-15));
        prop_assert!((project_ball(&p, r) - &p).norm() < 1e-12);
    }

    #[test]
    fn vector_text_round_trips(x in prop::collection::vec(-1e6..1e6f64, 1..8)) {
        let text = format!("[{}]", x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        let parsed = parse_vector(&text).unwrap();
        prop_assert_eq!(parsed.as_slice(), x.as_slice());
    }

    #[test]
    fn quadratic_prox_beats_feasible_points(
        m in prop::collection::vec(-1.0..1.0f64, 4),
        b in vec_in(2, 2.0),
        y in vec_in(2, 3.0),
        lambda in 0.05..2.0f64,
        probes in prop::collection::vec(vec_in(2, 1.0), 20),
    ) {
        let m = Matrix::from_row_slice(2, 2, &m);
        let b_mat = m.transpose() * m;
        let sol = QuadraticProx::new(b_mat.clone(), b.clone(), lambda, 1.0).unwrap().solve(&y).unwrap();
        prop_assert!(sol.x.norm() <= 1.0 + 1e-12);
        let obj = |x: &Vector| -x.dot(&(&b_mat * x)) + b.dot(x) - lambda * (x - &y).norm_squared();
        let best = obj(&sol.x);
        for z in probes {
            let z = project_ball(&z, 1.0);
            prop_assert!(obj(&z) <= best + 1e-10);
        }
    }
}
