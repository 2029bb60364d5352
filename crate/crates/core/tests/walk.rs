use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmh_core::circuit::{toffoli_equivalents, QuantumCircuit, WalkLayout};
use qmh_core::sim::{ancilla_residual, QuantumState, SparseState, C64};
use qmh_core::spectral::pi_state;
use qmh_core::walk::{
    fit_acceptance, model_for, synth_b, synth_equality_check, synth_inequality_check,
    synth_reflection, synth_shift, synth_v, synth_w, AcceptanceMode,
};
use qmh_core::{Constraint, IlpInstance, LinearForm};

fn fig1() -> IlpInstance {
    IlpInstance::new(
        2,
        2,
        LinearForm::new(0, vec![-2, -1]),
        vec![Constraint::ge(LinearForm::new(0, vec![1, 1]))],
    )
    .unwrap()
}

fn apply(c: &QuantumCircuit, input: u64) -> SparseState {
    let mut s = SparseState::basis(c.layout(), input).unwrap();
    s.apply_circuit(c).unwrap();
    s
}

fn single(s: &SparseState) -> u64 {
    assert_eq!(s.len(), 1);
    assert!((s.entries()[0].1.norm() - 1.0).abs() < 1e-12);
    s.entries()[0].0
}

/// Probability that the coin reads 1.
fn coin_one(s: &SparseState, wl: &WalkLayout) -> f64 {
    s.entries()
        .iter()
        .filter(|(i, _)| wl.c.read(*i) == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

#[test]
fn proposal_on_fig1() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let v = synth_v(&inst, &wl).unwrap();
    let s = apply(&v, 0);
    assert_eq!(s.len(), 16);
    for &(i, a) in s.entries() {
        assert!((a - C64::new(0.25, 0.0)).norm() < 1e-12);
        let point = inst.decode_index(wl.s_prime.read(i));
        assert_eq!(wl.f_prime.read_signed(i) as i128, inst.objective_value(&point));
        assert_eq!(wl.r.read(i), inst.satisfied_count(&point) as u64);
        assert_eq!(wl.s.read(i), 0);
        assert_eq!(wl.c.read(i), 0);
        if point == [1, 1] {
            assert_eq!(wl.f_prime.read_signed(i), -3);
            assert_eq!(wl.r.read(i), 1);
        }
    }
}

#[test]
fn proposal_without_constraints_leaves_no_counter() {
    let inst = IlpInstance::new(2, 2, LinearForm::new(0, vec![1, 1]), vec![]).unwrap();
    let wl = WalkLayout::new(&inst);
    assert_eq!(wl.r.width, 0);
    let s = apply(&synth_v(&inst, &wl).unwrap(), 0);
    assert_eq!(s.len(), 16);
}

#[test]
fn proposal_inverse_restores_basis_states() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let v = synth_v(&inst, &wl).unwrap();
    let round = v.compose(&v.inverse()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let input = rng.gen_range(0..1u64 << wl.qubit_count());
        assert_eq!(single(&apply(&round, input)), input);
    }
}

#[test]
fn equality_check_examples() {
    let inst = IlpInstance::new(
        1,
        2,
        LinearForm::new(0, vec![1]),
        vec![Constraint::eq(LinearForm::new(-1, vec![1]))],
    )
    .unwrap();
    let wl = WalkLayout::new(&inst);
    let h = synth_equality_check(&inst.constraints()[0].form, &wl).unwrap();
    for x in -2..=1i64 {
        let out = single(&apply(&h, wl.s_prime.write(0, x)));
        assert_eq!(wl.r.read(out), u64::from(x == 1), "x = {x}");
        assert_eq!(wl.f_prime.read(out), 0);
        assert_eq!(wl.scratch.read(out) | wl.carry.read(out), 0);
    }
}

#[test]
fn inequality_check_examples() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let g = synth_inequality_check(&inst.constraints()[0].form, &wl).unwrap();
    let at = |p: [i64; 2]| wl.s_prime.write(0, inst.encode_point(&p) as i64);
    assert_eq!(wl.r.read(single(&apply(&g, at([1, 1])))), 1);
    assert_eq!(wl.r.read(single(&apply(&g, at([-2, -1])))), 0);
    for x in 0..16 {
        let out = single(&apply(&g, wl.s_prime.write(0, x)));
        assert_eq!(wl.f_prime.read(out), 0);
    }
    let zero = synth_inequality_check(&LinearForm::zero(2), &wl).unwrap();
    for x in 0..16 {
        assert_eq!(wl.r.read(single(&apply(&zero, wl.s_prime.write(0, x)))), 1);
    }
}

fn coin_after_b(mode: AcceptanceMode, f: i64, f_prime: i64) -> f64 {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let b = synth_b(&inst, &wl, &model_for(&wl, 1.0, mode).unwrap()).unwrap();
    let input = wl.f_prime.write(wl.f.write(0, f), f_prime);
    let s = apply(&b, input);
    for &(i, _) in s.entries() {
        assert_eq!(wl.f.read_signed(i), f);
        assert_eq!(wl.f_prime.read_signed(i), f_prime);
        assert_eq!(wl.carry.read(i), 0);
    }
    coin_one(&s, &wl)
}

#[test]
fn coin_probabilities() {
    assert!((coin_after_b(AcceptanceMode::Exact, -3, -3) - 1.0).abs() < 1e-12);
    assert!((coin_after_b(AcceptanceMode::Exact, -3, -1) - (-2.0f64).exp()).abs() < 1e-12);
    for mode in [AcceptanceMode::Exact, AcceptanceMode::Linear] {
        assert!((coin_after_b(mode, 2, -3) - 1.0).abs() < 1e-12);
    }
    // every uphill step of the exact coin against the closed form
    for f in -8..=7i64 {
        for fp in -8..=7i64 {
            let delta = fp - f;
            let expected = (-(delta.max(0) as f64)).exp();
            let got = coin_after_b(AcceptanceMode::Exact, f, fp);
            if delta.abs() <= 15 {
                assert!((got - expected).abs() < 1e-12, "{f} -> {fp}");
            }
        }
    }
}

#[test]
fn linear_coin_follows_fitted_model() {
    let model = fit_acceptance(1.0, 4, AcceptanceMode::Linear).unwrap();
    for delta in 0..=9 {
        let got = coin_after_b(AcceptanceMode::Linear, -3, -3 + delta);
        assert!((got - model.acceptance(delta as i128)).abs() < 1e-12);
    }
}

#[test]
fn shift_examples() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let f = synth_shift(&inst, &wl).unwrap();
    let base = |c: i64, r: i64| {
        let mut i = wl.s.write(0, 5);
        i = wl.s_prime.write(i, 10);
        i = wl.f.write(i, -3);
        i = wl.f_prime.write(i, 4);
        i = wl.r.write(i, r);
        wl.c.write(i, c)
    };
    let out = single(&apply(&f, base(1, 1)));
    assert_eq!(wl.s.read(out), 10);
    assert_eq!(wl.s_prime.read(out), 5);
    assert_eq!(wl.f.read_signed(out), 4);
    assert_eq!(wl.f_prime.read_signed(out), -3);
    assert_eq!(single(&apply(&f, base(0, 1))), base(0, 1));
    assert_eq!(single(&apply(&f, base(0, 0))), base(0, 0));
    assert_eq!(single(&apply(&f, base(1, 0))), base(1, 0));
}

#[test]
fn reflection_examples() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let r = synth_reflection(&wl).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let mut input = rng.gen_range(0..1u64 << wl.qubit_count());
        if rng.gen_bool(0.5) {
            input = wl.c.write(wl.s_prime.write(input, 0), 0);
        }
        let s = apply(&r, input);
        assert_eq!(s.len(), 1);
        let (out, amp) = s.entries()[0];
        assert_eq!(out, input);
        let zero = wl.s_prime.read(input) == 0 && wl.c.read(input) == 0;
        let expected = if zero { 1.0 } else { -1.0 };
        assert!((amp - C64::new(expected, 0.0)).norm() < 1e-12);
    }
    // twice is the identity on a random superposition
    let entries: Vec<(u64, C64)> = (0..30)
        .map(|_| {
            (
                rng.gen_range(0..1u64 << wl.qubit_count()),
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    let start = SparseState::from_entries(&wl.layout, entries).unwrap();
    let mut s = start.clone();
    s.apply_circuit(&r).unwrap();
    s.apply_circuit(&r).unwrap();
    assert!(s.distance(&start) < 1e-12);
}

#[test]
fn walk_is_the_composition_in_order() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let model = model_for(&wl, 0.7, AcceptanceMode::Exact).unwrap();
    let v = synth_v(&inst, &wl).unwrap();
    let b = synth_b(&inst, &wl, &model).unwrap();
    let f = synth_shift(&inst, &wl).unwrap();
    let r = synth_reflection(&wl).unwrap();
    let expected = [v.clone(), b.clone(), f, b.inverse(), v.inverse(), r]
        .iter()
        .fold(QuantumCircuit::new(wl.layout.clone()), |acc, c| acc.compose(c).unwrap());
    let w = synth_w(&inst, &wl, &model).unwrap();
    assert_eq!(w.gates(), expected.gates());
    let labels: Vec<&str> = w.segments().iter().map(|s| s.label.as_str()).collect();
    assert_eq!(labels, vec!["V", "B", "F", "B", "V", "R"]);
}

#[test]
fn more_constraints_cost_more() {
    let base = IlpInstance::new(
        2,
        3,
        LinearForm::new(0, vec![1, -1]),
        vec![Constraint::ge(LinearForm::new(1, vec![1, 1]))],
    )
    .unwrap();
    let more = IlpInstance::new(
        2,
        3,
        LinearForm::new(0, vec![1, -1]),
        vec![
            Constraint::ge(LinearForm::new(1, vec![1, 1])),
            Constraint::ge(LinearForm::new(0, vec![-1, 1])),
            Constraint::ge(LinearForm::new(2, vec![1, 0])),
        ],
    )
    .unwrap();
    let cost = |inst: &IlpInstance| {
        let wl = WalkLayout::new(inst);
        let model = model_for(&wl, 1.0, AcceptanceMode::Linear).unwrap();
        toffoli_equivalents(&synth_w(inst, &wl, &model).unwrap()).toffoli_equivalents
    };
    assert_eq!(WalkLayout::new(&base).value_width, WalkLayout::new(&more).value_width);
    assert!(cost(&more) > cost(&base));
}

#[test]
fn exact_coin_costs_more_than_linear() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let b_cost = |mode| {
        let b = synth_b(&inst, &wl, &model_for(&wl, 1.0, mode).unwrap()).unwrap();
        toffoli_equivalents(&b).toffoli_equivalents
    };
    assert!(b_cost(AcceptanceMode::Exact) > b_cost(AcceptanceMode::Linear));
}

#[test]
fn walk_restores_ancillas_on_feasible_support() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    for beta in [0.0, 1.0, 4.0] {
        for mode in [AcceptanceMode::Exact, AcceptanceMode::Linear] {
            let w = synth_w(&inst, &wl, &model_for(&wl, beta, mode).unwrap()).unwrap();
            let mut s = pi_state(&inst, beta).unwrap();
            for _ in 0..3 {
                s.apply_circuit(&w).unwrap();
                assert!(ancilla_residual(&s, &wl) <= 1e-10);
                assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }
}
