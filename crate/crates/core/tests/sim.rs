use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmh_core::circuit::{Control, Gate, QuantumCircuit, RegisterLayout, WalkLayout};
use qmh_core::sim::{
    init_zero, marginal, prepare_initial, DenseState, QuantumState, SparseState, C64,
};
use qmh_core::walk::{model_for, synth_w};
use qmh_core::{AcceptanceMode, Constraint, Error, IlpInstance, LinearForm};

fn tiny() -> IlpInstance {
    IlpInstance::new(
        1,
        2,
        LinearForm::new(0, vec![1]),
        vec![Constraint::ge(LinearForm::new(1, vec![1]))],
    )
    .unwrap()
}

fn fig1() -> IlpInstance {
    IlpInstance::new(
        2,
        2,
        LinearForm::new(0, vec![-2, -1]),
        vec![Constraint::ge(LinearForm::new(0, vec![1, 1]))],
    )
    .unwrap()
}

fn random_state(layout: &RegisterLayout, rng: &mut ChaCha8Rng, terms: usize) -> SparseState {
    let k = layout.qubit_count();
    let entries = (0..terms)
        .map(|_| {
            (
                rng.gen_range(0..1u64 << k),
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    let mut s = SparseState::from_entries(layout, entries).unwrap();
    let n = s.norm_sqr().sqrt();
    s.scale(C64::new(1.0 / n, 0.0));
    s
}

#[test]
fn zero_state_and_guard() {
    let s = init_zero(&RegisterLayout::sequential(&[("q", 3)])).unwrap();
    let mut expected = [C64::new(0.0, 0.0); 8];
    expected[0] = C64::new(1.0, 0.0);
    assert_eq!(s.amplitudes(), &expected[..]);
    assert_eq!(s.norm_sqr(), 1.0);
    let big = RegisterLayout::sequential(&[("q", 27)]);
    assert!(matches!(init_zero(&big), Err(Error::Guard(_))));
    assert!(SparseState::zero(&big).is_ok());
}

#[test]
fn dense_and_sparse_agree_on_the_walk() {
    let inst = tiny();
    let wl = WalkLayout::new(&inst);
    assert!(wl.qubit_count() <= 14);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for mode in [AcceptanceMode::Exact, AcceptanceMode::Linear] {
        let w = synth_w(&inst, &wl, &model_for(&wl, 0.8, mode).unwrap()).unwrap();
        let start = random_state(&wl.layout, &mut rng, 64);
        let mut sparse = start.clone();
        let mut dense = DenseState::from_sparse(&start).unwrap();
        for _ in 0..3 {
            sparse.apply_circuit(&w).unwrap();
            dense.apply_circuit(&w).unwrap();
        }
        let back = SparseState::from_dense(&dense);
        assert!(back.distance(&sparse) < 1e-10);
        assert!((dense.norm_sqr() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn prepare_initial_fig1() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let s = prepare_initial(&inst, &wl, SparseState::zero(&wl.layout).unwrap()).unwrap();
    assert_eq!(s.len(), 16);
    for &(i, a) in s.entries() {
        assert!((a.re - 0.25).abs() < 1e-12 && a.im.abs() < 1e-12);
        let x = inst.decode_index(wl.s.read(i));
        assert_eq!(wl.f.read_signed(i) as i128, inst.objective_value(&x));
        assert_eq!(i & !(wl.s.mask() | wl.f.mask()), 0);
    }
    let m = marginal(&s, &inst, &wl).unwrap();
    assert_eq!(m.len(), 16);
    assert!(m.iter().all(|e| (e.probability - 1.0 / 16.0).abs() < 1e-12));
    assert_eq!(m.iter().filter(|e| e.feasible).count(), 6);
}

#[test]
fn prepare_initial_two_point_domain() {
    let inst = IlpInstance::new(1, 1, LinearForm::new(0, vec![1]), vec![]).unwrap();
    let wl = WalkLayout::new(&inst);
    let s = prepare_initial(&inst, &wl, init_zero(&wl.layout).unwrap()).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = 0;
    let minus_one = wl.f.write(wl.s.write(0, -1), -1);
    assert!((s.amplitude(zero).re - h).abs() < 1e-12);
    assert!((s.amplitude(minus_one).re - h).abs() < 1e-12);
    assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn negation_twice_restores_a_superposition() {
    let layout = RegisterLayout::sequential(&[("r", 3), ("x", 2)]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = random_state(&layout, &mut rng, 12);
    let neg = QuantumCircuit::from_gates(layout.clone(), qmh_core::arith::negate_gates(&[0, 1, 2])).unwrap();
    let mut s = start.clone();
    s.apply_circuit(&neg).unwrap();
    s.apply_circuit(&neg).unwrap();
    assert!(s.distance(&start) < 1e-14);
}

#[test]
fn measurement_is_reproducible() {
    let inst = fig1();
    let wl = WalkLayout::new(&inst);
    let w = synth_w(&inst, &wl, &model_for(&wl, 1.0, AcceptanceMode::Exact).unwrap()).unwrap();
    let run = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = prepare_initial(&inst, &wl, SparseState::zero(&wl.layout).unwrap()).unwrap();
        let mut outcomes = Vec::new();
        for _ in 0..4 {
            s.apply_circuit(&w).unwrap();
            outcomes.push(s.measure_partial(&[&wl.c, &wl.s_prime, &wl.f_prime, &wl.r], &mut rng).unwrap());
            // measured registers are reset
            assert!(s.entries().iter().all(|(i, _)| {
                wl.c.read(*i) == 0 && wl.s_prime.read(*i) == 0 && wl.f_prime.read(*i) == 0 && wl.r.read(*i) == 0
            }));
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
        (outcomes, s)
    };
    let (a, sa) = run(9);
    let (b, sb) = run(9);
    assert_eq!(a, b);
    assert_eq!(sa.entries(), sb.entries());
}

#[test]
fn measurement_frequencies_follow_born_rule() {
    let layout = RegisterLayout::sequential(&[("q", 2)]);
    let c = QuantumCircuit::from_gates(
        layout.clone(),
        vec![Gate::ry(0, 2.0 * (0.3f64).sqrt().asin(), vec![]), Gate::h(1)],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ones = 0;
    let trials = 20_000;
    for _ in 0..trials {
        let mut s = SparseState::zero(&layout).unwrap();
        s.apply_circuit(&c).unwrap();
        let m = s.measure_qubits(&[0], &mut rng).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        ones += m.bits as usize;
        let expected = if m.bits == 1 { 0.3 } else { 0.7 };
        assert!((m.probability - expected).abs() < 1e-12);
    }
    let freq = ones as f64 / trials as f64;
    // four standard deviations
    assert!((freq - 0.3).abs() < 4.0 * (0.3f64 * 0.7 / trials as f64).sqrt());
}

fn gate_on(k: usize) -> impl Strategy<Value = Gate> {
    (0..5u8, 0..k, prop::collection::vec((0..k, any::<bool>()), 0..3), -3.0f64..3.0).prop_map(
        move |(kind, t, cs, angle)| {
            let mut seen = vec![t];
            let controls: Vec<Control> = cs
                .into_iter()
                .filter(|(q, _)| {
                    let fresh = !seen.contains(q);
                    seen.push(*q);
                    fresh
                })
                .map(|(qubit, positive)| Control { qubit, positive })
                .collect();
            match kind {
                0 => Gate::h(t),
                1 => Gate::mcx(t, controls),
                2 => Gate::ry(t, angle, controls),
                3 => Gate::Mcz { target: t, controls },
                _ => Gate::T { target: t },
            }
        },
    )
}

proptest! {
    #[test]
    fn circuits_preserve_norm_and_backends_agree(
        gates in prop::collection::vec(gate_on(5), 0..30),
        seed in any::<u64>(),
    ) {
        let layout = RegisterLayout::sequential(&[("q", 5)]);
        let c = QuantumCircuit::from_gates(layout.clone(), gates).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_state(&layout, &mut rng, 6);
        let mut sparse = start.clone();
        sparse.apply_circuit(&c).unwrap();
        let mut dense = DenseState::from_sparse(&start).unwrap();
        dense.apply_circuit(&c).unwrap();
        prop_assert!((sparse.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert!(SparseState::from_dense(&dense).distance(&sparse) < 1e-10);
    }

    #[test]
    fn outcome_distribution_sums_to_one(seed in any::<u64>(), q in 0usize..4) {
        let layout = RegisterLayout::sequential(&[("q", 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&layout, &mut rng, 8);
        let dist = s.outcome_distribution(&[q]);
        let total: f64 = dist.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
