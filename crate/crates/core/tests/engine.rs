mod common;

use std::f64::consts::FRAC_PI_2;

use pauliprop::circuit::{kicked_ising, AngleSpec, Topology};
use pauliprop::engine::{apply_rotation, evolve, partition, EngineConfig};
use pauliprop::pauli::{commutes, multiply_by_generator};
use pauliprop::{Circuit, PauliString, PauliSum};

fn circuit_from(n: usize, gates: &[(String, f64)]) -> Circuit {
    let mut c = Circuit::new(n);
    for (l, t) in gates {
        c.push(PauliString::parse(l, n).unwrap(), *t).unwrap();
    }
    c
}

fn sum_from(n: usize, terms: &[(String, f64)]) -> PauliSum {
    PauliSum::from_terms(n, terms.iter().map(|(l, c)| (PauliString::parse(l, n).unwrap(), *c))).unwrap()
}

#[test]
fn exact_propagation_matches_dense_oracle() {
    let mut rng = common::rng(11);
    for case in 0..120 {
        let n = 1 + case % 6;
        let gates = common::random_gates(&mut rng, n, 1 + case % 40);
        let obs = common::random_observable(&mut rng, n, 1 + case % 3);
        let want = common::heisenberg_expectation(n, &gates, &obs);
        let (out, log) = evolve(&circuit_from(n, &gates), sum_from(n, &obs), &EngineConfig::new(0.0).workers(1)).unwrap();
        assert!((out.expectation() - want).abs() <= 1e-10, "case {case}: {} vs {want}", out.expectation());
        let mut prev = log.initial_norm;
        for g in &log.gates {
            assert!((g.norm_after - prev).abs() <= 1e-12, "norm drift at gate {}", g.gate_index);
            prev = g.norm_after;
        }
        out.check_index().unwrap();
    }
}

#[test]
fn single_gate_matches_conjugation() {
    // {Z0}, sigma = X0, theta = pi/3 -> cos Z0 + sin Y0 (quarter turn plus residual).
    let t = std::f64::consts::PI / 3.0;
    let want_z = common::heisenberg_expectation(1, &[("X".into(), t)], &[("Z".into(), 1.0)]);
    let mut s = sum_from(1, &[("Z".into(), 1.0)]);
    apply_rotation(&mut s, &PauliString::parse("X0", 1).unwrap(), t, 0.0, 1).unwrap();
    assert!((s.expectation() - want_z).abs() < 1e-15);
    assert!((s.get(&PauliString::parse("Y0", 1).unwrap()).unwrap() - t.sin()).abs() < 1e-15);
}

#[test]
fn partition_pairs_agree_with_products() {
    let mut rng = common::rng(5);
    let n = 5;
    for _ in 0..50 {
        let obs = common::random_observable(&mut rng, n, 30);
        let sum = sum_from(n, &obs);
        let sigma = PauliString::parse(&common::random_label(&mut rng, n, 3), n).unwrap();
        let p = partition(&sum, &sigma).unwrap();
        assert_eq!(p.comm.len() + p.anti.len(), sum.len());
        for (&r, partner) in p.anti.iter().zip(&p.partner) {
            let row = sum.row(r as usize);
            assert!(!commutes(&row, &sigma).unwrap());
            let prod = multiply_by_generator(&row, &sigma).unwrap();
            let target = prod.with_alpha(prod.hermitian_alpha());
            let found = sum.get(&target).map(|_| ());
            assert_eq!(partner.is_some(), found.is_some());
            if let Some(q) = partner {
                assert_eq!(sum.row(*q as usize), target);
            }
        }
        for (a, b) in p.merge_pairs() {
            assert!(a < b);
        }
    }
}

#[test]
fn fractions_match_naive_partition() {
    let mut rng = common::rng(21);
    let n = 6;
    let gates = common::random_gates(&mut rng, n, 40);
    let mut s = sum_from(n, &[("ZIIIII".into(), 1.0)]);
    for (k, (l, t)) in gates.iter().enumerate() {
        let sigma = PauliString::parse(l, n).unwrap();
        let rows: Vec<PauliString> = (0..s.len()).map(|r| s.row(r)).collect();
        let anti: Vec<&PauliString> = rows.iter().filter(|r| !commutes(r, &sigma).unwrap()).collect();
        let paired = anti
            .iter()
            .filter(|r| {
                let p = multiply_by_generator(r, &sigma).unwrap();
                rows.contains(&p.with_alpha(p.hermitian_alpha()))
            })
            .count();
        let len = rows.len() as f64;
        let st = apply_rotation(&mut s, &sigma, *t, 1e-3, k + 1).unwrap();
        assert_eq!(st.phi, anti.len() as f64 / len);
        assert_eq!(st.eta, paired as f64 / len);
        assert!(st.eta <= st.phi && st.phi <= 1.0);
    }
}

#[test]
fn clifford_kicked_ising_keeps_one_row() {
    let topo = Topology::grid(3, 3).unwrap();
    for tx in [0.0, FRAC_PI_2] {
        let c = kicked_ising(&topo, 5, -FRAC_PI_2, AngleSpec::Fixed(tx)).unwrap();
        let obs = sum_from(9, &[("Z4".into(), 1.0)]);
        let (out, log) = evolve(&c, obs, &EngineConfig::new(0.0).workers(1)).unwrap();
        assert!(log.gates.iter().all(|g| g.n_after == 1));
        let gates: Vec<(String, f64)> =
            c.gates().iter().map(|g| (g.generator.to_dense_label(), g.theta)).collect();
        let want = common::heisenberg_expectation(9, &gates, &[("IIIIZIIII".into(), 1.0)]);
        assert!((out.expectation() - want).abs() < 1e-12);
        assert!(want.abs() < 1e-12 || (want.abs() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn truncation_only_shrinks_the_norm() {
    let topo = Topology::grid(3, 4).unwrap();
    let spec = AngleSpec::UniformRandom { low: -0.8, high: 0.8, seed: 3 };
    let c = kicked_ising(&topo, 6, -FRAC_PI_2, spec).unwrap();
    for delta in [1e-4, 1e-3, 1e-2] {
        let (_, log) = evolve(&c, sum_from(12, &[("Z5".into(), 1.0)]), &EngineConfig::new(delta)).unwrap();
        assert!(log.max_norm_increase() <= 1e-12);
        assert!(log.n_max() as f64 <= log.trivial_bound());
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let topo = Topology::grid(4, 4).unwrap();
    let spec = AngleSpec::UniformRandom { low: -0.8, high: 0.8, seed: 9 };
    let c = kicked_ising(&topo, 5, -FRAC_PI_2, spec).unwrap();
    let obs = sum_from(16, &[("Z5".into(), 1.0), ("X2*X3".into(), 0.5)]);
    let run = |w: usize| evolve(&c, obs.clone(), &EngineConfig::new(1e-5).workers(w)).unwrap();
    let (base, base_log) = run(1);
    assert!(base_log.n_max() > 4096, "too small to exercise the parallel path");
    for w in [2, 4, 8] {
        let (out, log) = run(w);
        assert_eq!(out.expectation().to_bits(), base.expectation().to_bits());
        assert_eq!(out.coeffs(), base.coeffs());
        let counts: Vec<usize> = log.gates.iter().map(|g| g.n_after).collect();
        let base_counts: Vec<usize> = base_log.gates.iter().map(|g| g.n_after).collect();
        assert_eq!(counts, base_counts);
    }
}
