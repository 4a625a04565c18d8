mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C;
use pauliprop::analysis::{moment_estimate, PowerLawModel};
use pauliprop::circuit::{kicked_ising, AngleSpec, Topology};
use pauliprop::convergence::{run_protocol, ConvergenceConfig};
use pauliprop::engine::{evolve, EngineConfig};
use pauliprop::estimator::{predict_nmax, Probe, ProbeSeries};
use pauliprop::pauli::{expectation_on_zero, multiply_by_generator};
use pauliprop::{Circuit, PauliString, PauliSum};
use proptest::prelude::*;

fn arb_label(n: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!['I', 'X', 'Y', 'Z']), n).prop_map(|v| v.into_iter().collect())
}

fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
    (arb_label(n), 0u8..4).prop_map(|(l, a)| PauliString::parse_dense(&l).unwrap().with_alpha(a))
}

/// Dense action of `(-i)^alpha Z^z X^x`, written as a power of `-i` times
/// the Hermitian letters (`Z X = i Y`).
fn dense_apply(p: &PauliString, psi: &[C]) -> Vec<C> {
    let label: String = (0..p.n()).map(|q| p.pauli_at(q).as_char()).collect();
    let k = (p.alpha() as i32 - p.y_count() as i32).rem_euclid(4);
    let phase = C::new(0.0, -1.0).powi(k);
    common::apply_pauli(psi, label.as_bytes()).into_iter().map(|a| a * phase).collect()
}

fn random_state(n: usize, seed: u64) -> Vec<C> {
    use rand::RngExt;
    let mut rng = common::rng(seed);
    (0..1 << n).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn close(a: &[C], b: &[C], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
}

fn arb_circuit(max_n: usize, max_gates: usize) -> impl Strategy<Value = (usize, Vec<(String, f64)>, String)> {
    (1..=max_n).prop_flat_map(move |n| {
        let angle = prop_oneof![(-4i32..=4).prop_map(|q| q as f64 * FRAC_PI_2), -7.0f64..7.0];
        let gate = (arb_label(n).prop_filter("non-identity", |l| l.chars().any(|c| c != 'I')), angle);
        (Just(n), prop::collection::vec(gate, 0..=max_gates), arb_label(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn products_associate_like_matrices(
        (a, b, c) in (1usize..=5).prop_flat_map(|n| (arb_string(n), arb_string(n), arb_string(n))),
        seed in any::<u64>(),
    ) {
        let psi = random_state(a.n(), seed);
        let left = multiply_by_generator(&multiply_by_generator(&c, &b).unwrap(), &a).unwrap();
        let right = multiply_by_generator(&c, &multiply_by_generator(&b, &a).unwrap()).unwrap();
        prop_assert_eq!(&left, &right);
        let want = dense_apply(&a, &dense_apply(&b, &dense_apply(&c, &psi)));
        prop_assert!(close(&dense_apply(&left, &psi), &want, 1e-12));
    }

    #[test]
    fn zero_state_expectation_matches_dense(p in (1usize..=8).prop_flat_map(arb_string)) {
        let mut zero = vec![C::new(0.0, 0.0); 1 << p.n()];
        zero[0] = C::new(1.0, 0.0);
        let want = dense_apply(&p, &zero)[0];
        match expectation_on_zero(&p) {
            Ok(e) => prop_assert!((C::new(e, 0.0) - want).norm() <= 1e-14),
            Err(_) => prop_assert!(want.im.abs() > 0.5),
        }
    }

    #[test]
    fn labels_round_trip(l in (1usize..=140).prop_flat_map(arb_label)) {
        let p = PauliString::parse_dense(&l).unwrap();
        prop_assert_eq!(p.to_dense_label(), l.clone());
        let q = PauliString::from_words(p.n(), p.words(), p.alpha()).unwrap();
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(PauliString::parse(&p.to_sparse_label(), p.n()).unwrap(), p);
    }

    #[test]
    fn raw_norm_and_trivial_bound(
        terms in prop::collection::vec((arb_label(6), -1.0f64..1.0), 1..80),
        delta in 1e-3f64..0.3,
    ) {
        let mut s = PauliSum::from_terms(6, terms.iter().map(|(l, c)| (PauliString::parse_dense(l).unwrap(), *c))).unwrap();
        let naive: f64 = s.coeffs().iter().map(|c| c * c).sum();
        prop_assert!((s.raw_norm().powi(2) - naive).abs() <= 1e-12 * naive.max(f64::MIN_POSITIVE));
        let norm = s.raw_norm();
        s.truncate(delta);
        prop_assert!(s.len() as f64 <= norm * norm / (delta * delta));
    }

    #[test]
    fn exact_evolution_matches_dense((n, gates, obs) in arb_circuit(6, 60)) {
        let mut c = Circuit::new(n);
        for (l, t) in &gates {
            c.push(PauliString::parse_dense(l).unwrap(), *t).unwrap();
        }
        let o = PauliSum::single(&PauliString::parse_dense(&obs).unwrap()).unwrap();
        let (out, log) = evolve(&c, o, &EngineConfig::new(0.0).workers(1)).unwrap();
        let want = common::heisenberg_expectation(n, &gates, &[(obs, 1.0)]);
        prop_assert!((out.expectation() - want).abs() <= 1e-10);
        let mut prev = log.initial_norm;
        for g in &log.gates {
            prop_assert!((g.norm_after - prev).abs() <= 1e-12);
            prop_assert!(0.0 <= g.eta && g.eta <= g.phi && g.phi <= 1.0);
            prev = g.norm_after;
        }
    }

    #[test]
    fn truncated_evolution_is_bounded((n, gates, obs) in arb_circuit(6, 60), delta in 1e-3f64..0.2) {
        let mut c = Circuit::new(n);
        for (l, t) in &gates {
            c.push(PauliString::parse_dense(l).unwrap(), *t).unwrap();
        }
        let o = PauliSum::single(&PauliString::parse_dense(&obs).unwrap()).unwrap();
        let (_, log) = evolve(&c, o, &EngineConfig::new(delta).workers(1)).unwrap();
        let mut prev = log.initial_norm;
        let mut rows = log.initial_rows;
        for g in &log.gates {
            prop_assert!(g.norm_after <= prev + 1e-12);
            prop_assert!(g.n_before == rows);
            prop_assert!(g.n_after <= g.n_before + (g.phi * g.n_before as f64).round() as usize);
            prev = g.norm_after;
            rows = g.n_after;
        }
        prop_assert!(log.n_max() as f64 <= log.trivial_bound());
        prop_assert_eq!(log.n_max(), log.gates.iter().map(|g| g.n_after).chain([log.initial_rows]).max().unwrap());
    }

    #[test]
    fn clifford_circuits_keep_one_row((n, gates, obs) in arb_circuit(8, 60), q in prop::collection::vec(-4i32..=4, 60)) {
        prop_assume!(obs.chars().any(|c| c != 'I'));
        let mut c = Circuit::new(n);
        for ((l, _), k) in gates.iter().zip(&q) {
            c.push(PauliString::parse_dense(l).unwrap(), *k as f64 * FRAC_PI_2).unwrap();
        }
        let o = PauliSum::single(&PauliString::parse_dense(&obs).unwrap()).unwrap();
        let (_, log) = evolve(&c, o, &EngineConfig::new(0.0)).unwrap();
        prop_assert!(log.gates.iter().all(|g| g.n_after == 1));
    }

    #[test]
    fn circuit_json_round_trip(rows in 1usize..4, cols in 2usize..4, steps in 1usize..4, seed in any::<u64>()) {
        let topo = Topology::grid(rows, cols).unwrap();
        let spec = AngleSpec::UniformRandom { low: -PI / 4.0, high: PI / 4.0, seed };
        let c = kicked_ising(&topo, steps, -FRAC_PI_2, spec).unwrap();
        prop_assert_eq!(c.len(), steps * (topo.edges().len() + topo.n()));
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(kicked_ising(&topo, steps, -FRAC_PI_2, spec).unwrap(), c);
    }

    #[test]
    fn power_law_normalization(m in 0.5f64..3.0, log_delta in -8.0f64..-2.0) {
        let model = PowerLawModel::new(m, 10f64.powf(log_delta)).unwrap();
        // 2 int_delta^inf A t^-(m+1) dt = 2 A delta^-m / m
        let mass = 2.0 * model.amplitude() * model.delta.powf(-m) / m;
        prop_assert!((mass - 1.0).abs() <= 1e-10);
        prop_assert_eq!(model.tail_mass(model.delta), 1.0);
    }

    #[test]
    fn second_moment_is_the_norm(m in 0.5f64..1.99, log_delta in -8.0f64..-2.0, norm_sq in 1e-3f64..10.0) {
        let model = PowerLawModel::new(m, 10f64.powf(log_delta)).unwrap();
        prop_assert_eq!(moment_estimate(&model, 2.0, norm_sq).unwrap(), norm_sq);
    }

    #[test]
    fn nmax_prediction_is_exact_on_log_linear_data(a in 0.5f64..3.0, b in -2.0f64..2.0) {
        let deltas = [0.01, 0.01 / 2f64.sqrt(), 0.005];
        let probes = deltas
            .iter()
            .map(|&d| Probe { delta: d, n_max: (b + a * (1.0 / d).ln()).exp().round() as usize, k_star: 0, norm_at_k_star: 1.0, runtime_s: 0.0 })
            .collect();
        let series = ProbeSeries::from_probes(probes, 40, 100, 1.0);
        let p = predict_nmax(&series, &[0.0025, 0.00125]).unwrap();
        // Rounded counts bound the exactness; compare against the fit itself.
        for (t, n) in p.targets.iter().zip(&p.n_max) {
            let want = p.fit.predict(t.ln()).exp();
            prop_assert!(*n > 0.0 && (n - want.min(1.0 / (t * t))).abs() <= 1e-9 * want);
        }
    }
}

#[test]
fn nmax_prediction_reproduces_exact_power() {
    let deltas = [0.01f64, 0.01 / 2f64.sqrt(), 0.005];
    let probes = deltas
        .iter()
        .map(|&d| Probe { delta: d, n_max: (16.0 * (0.01 / d).powi(2)).round() as usize, k_star: 0, norm_at_k_star: 1.0, runtime_s: 0.0 })
        .collect();
    let series = ProbeSeries::from_probes(probes, 40, 100, 1.0);
    let p = predict_nmax(&series, &[0.0025]).unwrap();
    assert!((p.n_max[0] - 256.0).abs() < 1e-9, "{}", p.n_max[0]);
    assert!((p.fit.slope + 2.0).abs() < 1e-12);
}

fn small_protocol_case() -> (Circuit, PauliSum) {
    let topo = Topology::grid(3, 3).unwrap();
    let spec = AngleSpec::UniformRandom { low: -0.7, high: 0.7, seed: 4 };
    let c = kicked_ising(&topo, 4, -FRAC_PI_2, spec).unwrap();
    (c, PauliSum::single(&PauliString::parse("Z4", 9).unwrap()).unwrap())
}

#[test]
fn protocol_is_deterministic_and_budget_monotone() {
    let (c, o) = small_protocol_case();
    let base = ConvergenceConfig { eps_tol: 1e-9, max_steps: 6, workers: 1, ..Default::default() };
    let short = run_protocol(&c, &o, &ConvergenceConfig { max_steps: 4, ..base.clone() }).unwrap();
    let long = run_protocol(&c, &o, &base).unwrap();
    assert_eq!(&long.steps[..4].iter().map(|s| (s.delta, s.estimate)).collect::<Vec<_>>()[..],
        &short.steps.iter().map(|s| (s.delta, s.estimate)).collect::<Vec<_>>()[..]);
    for w in [2, 4] {
        let other = run_protocol(&c, &o, &ConvergenceConfig { workers: w, ..base.clone() }).unwrap();
        assert_eq!(other.to_json().unwrap(), long.to_json().unwrap());
    }
    for (n, s) in long.steps.iter().enumerate().skip(1) {
        let q = s.delta / long.steps[n - 1].delta;
        assert!((q - base.ratio).abs() <= 1e-15 * base.ratio);
    }
}

#[test]
fn converged_status_implies_tight_window() {
    let (c, o) = small_protocol_case();
    for eps in [1e-1, 1e-2, 1e-3] {
        let cfg = ConvergenceConfig { eps_tol: eps, max_steps: 12, workers: 1, ..Default::default() };
        let r = run_protocol(&c, &o, &cfg).unwrap();
        if r.status == pauliprop::convergence::Status::ApparentlyConverged {
            let tail: Vec<f64> = r.steps[r.steps.len() - cfg.ell..].iter().map(|s| s.estimate.unwrap()).collect();
            let span = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - tail.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(span <= eps);
            assert_eq!(r.final_estimate, tail.last().copied());
        }
    }
}

#[test]
fn clifford_protocol_converges_immediately() {
    let topo = Topology::grid(3, 3).unwrap();
    let c = kicked_ising(&topo, 4, -FRAC_PI_2, AngleSpec::Fixed(0.0)).unwrap();
    let o = PauliSum::single(&PauliString::parse("Z4", 9).unwrap()).unwrap();
    let cfg = ConvergenceConfig { workers: 1, ..Default::default() };
    let r = run_protocol(&c, &o, &cfg).unwrap();
    assert_eq!(r.status, pauliprop::convergence::Status::ApparentlyConverged);
    assert_eq!(r.steps.len(), cfg.ell);
    assert!(!r.local_minimum_risk);
}
