//! Statevector simulation with dense and sparse backends.
//!
//! Both backends apply the same gate semantics exactly. The dense backend
//! stores all `2^k` amplitudes. The sparse backend keeps only basis states
//! carrying amplitude, which is what makes 24 to 30 qubit walk layouts
//! tractable: the walk never spreads over more than a few thousand basis
//! states.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::Rng;
use serde::Serialize;

use crate::circuit::{Control, Gate, QuantumCircuit, Register, RegisterLayout, WalkLayout};
use crate::error::{CircuitError, Error, Result};
use crate::ilp::IlpInstance;

pub type C64 = Complex<f64>;

/// Largest qubit count the dense backend accepts.
pub const MAX_DENSE_QUBITS: usize = 26;
/// Largest qubit count addressable by a 64-bit basis index.
pub const MAX_SPARSE_QUBITS: usize = 63;
/// Sparse amplitudes below this magnitude are dropped.
pub const SPARSE_CUTOFF: f64 = 1e-15;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Outcome of a partial measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    /// Bit `i` is the outcome of the `i`-th measured qubit.
    pub bits: u64,
    pub probability: f64,
}

/// Control mask and required value for a control list.
fn control_pattern(controls: &[Control]) -> (u64, u64) {
    controls.iter().fold((0, 0), |(m, v), c| {
        let b = 1u64 << c.qubit;
        (m | b, if c.positive { v | b } else { v })
    })
}

#[inline]
fn fires(index: u64, pattern: (u64, u64)) -> bool {
    index & pattern.0 == pattern.1
}

fn ry_coefficients(angle: f64) -> (f64, f64) {
    ((angle / 2.0).cos(), (angle / 2.0).sin())
}

/// Behaviour shared by the dense and sparse backends.
pub trait QuantumState: Clone {
    fn layout(&self) -> &RegisterLayout;

    fn apply_gate(&mut self, gate: &Gate);

    /// Visit every stored amplitude in ascending basis order.
    fn for_each_amplitude<F: FnMut(u64, C64)>(&self, f: F);

    fn amplitude(&self, index: u64) -> C64;

    /// Keep only basis states with `index & mask == value`, multiplying the
    /// survivors by `scale`.
    fn project(&mut self, mask: u64, value: u64, scale: f64);

    fn qubit_count(&self) -> usize {
        self.layout().qubit_count()
    }

    fn apply_circuit(&mut self, circuit: &QuantumCircuit) -> Result<()> {
        if circuit.layout() != self.layout() {
            return Err(CircuitError::LayoutMismatch {
                left: self.layout().qubit_count(),
                right: circuit.layout().qubit_count(),
            }
            .into());
        }
        for g in circuit.gates() {
            self.apply_gate(g);
        }
        Ok(())
    }

    fn norm_sqr(&self) -> f64 {
        let mut total = 0.0;
        self.for_each_amplitude(|_, a| total += a.norm_sqr());
        total
    }

    /// Probability that `index & mask != 0`.
    fn mass_outside(&self, mask: u64) -> f64 {
        let mut total = 0.0;
        self.for_each_amplitude(|i, a| {
            if i & mask != 0 {
                total += a.norm_sqr()
            }
        });
        total
    }

    /// Born-rule distribution of the joint outcome on `qubits`.
    fn outcome_distribution(&self, qubits: &[usize]) -> BTreeMap<u64, f64> {
        let mut dist = BTreeMap::new();
        self.for_each_amplitude(|i, a| {
            let p = a.norm_sqr();
            if p > 0.0 {
                *dist.entry(gather_bits(i, qubits)).or_insert(0.0) += p;
            }
        });
        dist
    }

    /// Measure `qubits`, collapse, renormalize, then reset every measured
    /// qubit to |0>.
    fn measure_qubits<R: Rng + ?Sized>(&mut self, qubits: &[usize], rng: &mut R) -> Result<Measurement> {
        let dist = self.outcome_distribution(qubits);
        let total: f64 = dist.values().sum();
        if total.is_nan() || total <= f64::MIN_POSITIVE {
            return Err(Error::ZeroMass);
        }
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (&bits, &p) in &dist {
            acc += p;
            chosen = Some((bits, p));
            if u < acc {
                break;
            }
        }
        let (bits, p) = chosen.expect("nonempty distribution");
        let mask = qubits.iter().fold(0u64, |m, &q| m | 1 << q);
        let value = scatter_bits(bits, qubits);
        self.project(mask, value, 1.0 / p.sqrt());
        for (i, &q) in qubits.iter().enumerate() {
            if bits >> i & 1 == 1 {
                self.apply_gate(&Gate::x(q));
            }
        }
        Ok(Measurement {
            bits,
            probability: p / total,
        })
    }

    /// Measure whole registers; returns one unsigned value per register.
    fn measure_partial<R: Rng + ?Sized>(&mut self, registers: &[&Register], rng: &mut R) -> Result<Vec<u64>> {
        let qubits: Vec<usize> = registers.iter().flat_map(|r| r.qubits()).collect();
        let m = self.measure_qubits(&qubits, rng)?;
        let mut values = Vec::with_capacity(registers.len());
        let mut shift = 0;
        for r in registers {
            let mask = crate::ilp::low_mask(r.width as u32);
            values.push(if r.width == 0 { 0 } else { m.bits >> shift & mask });
            shift += r.width;
        }
        Ok(values)
    }

    /// Probability of each unsigned value of `reg`.
    fn register_distribution(&self, reg: &Register) -> Result<Vec<f64>> {
        if reg.width > crate::ilp::MAX_ENUMERATION_BITS as usize {
            return Err(Error::Guard(format!(
                "register {} has {} qubits, marginal limit is {}",
                reg.name,
                reg.width,
                crate::ilp::MAX_ENUMERATION_BITS
            )));
        }
        let mut out = vec![0.0; 1 << reg.width];
        self.for_each_amplitude(|i, a| out[reg.read(i) as usize] += a.norm_sqr());
        Ok(out)
    }
}

/// Bits of `index` at `qubits`, packed from bit 0.
pub fn gather_bits(index: u64, qubits: &[usize]) -> u64 {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &q)| acc | (index >> q & 1) << i)
}

fn scatter_bits(bits: u64, qubits: &[usize]) -> u64 {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &q)| acc | (bits >> i & 1) << q)
}

/// All `2^k` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    layout: RegisterLayout,
    amplitudes: Vec<C64>,
}

impl DenseState {
    pub fn zero(layout: &RegisterLayout) -> Result<Self> {
        Self::basis(layout, 0)
    }

    pub fn basis(layout: &RegisterLayout, index: u64) -> Result<Self> {
        let k = layout.qubit_count();
        if k > MAX_DENSE_QUBITS {
            let bytes = (16u128 << k) as f64;
            return Err(Error::Guard(format!(
                "dense simulation of {k} qubits needs {:.1} GiB, the limit is {MAX_DENSE_QUBITS} qubits",
                bytes / (1u64 << 30) as f64
            )));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << k];
        amplitudes[index as usize] = C64::new(1.0, 0.0);
        Ok(DenseState {
            layout: layout.clone(),
            amplitudes,
        })
    }

    pub fn from_amplitudes(layout: &RegisterLayout, amplitudes: Vec<C64>) -> Result<Self> {
        let k = layout.qubit_count();
        if k > MAX_DENSE_QUBITS || amplitudes.len() != 1 << k {
            return Err(Error::Guard(format!(
                "amplitude vector of length {} does not match {k} qubits",
                amplitudes.len()
            )));
        }
        Ok(DenseState {
            layout: layout.clone(),
            amplitudes,
        })
    }

    pub fn from_sparse(state: &SparseState) -> Result<Self> {
        let mut out = DenseState::zero(state.layout())?;
        out.amplitudes[0] = C64::new(0.0, 0.0);
        for &(i, a) in state.entries() {
            out.amplitudes[i as usize] = a;
        }
        Ok(out)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    fn for_pairs(&mut self, target: usize, pattern: (u64, u64), mut f: impl FnMut(&mut C64, &mut C64)) {
        let t = 1u64 << target;
        for i in 0..self.amplitudes.len() as u64 {
            if i & t == 0 && fires(i, pattern) {
                let (lo, hi) = (i as usize, (i | t) as usize);
                let (a, b) = self.amplitudes.split_at_mut(hi);
                f(&mut a[lo], &mut b[0]);
            }
        }
    }
}

impl QuantumState for DenseState {
    fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    fn apply_gate(&mut self, gate: &Gate) {
        let pattern = control_pattern(gate.controls());
        match *gate {
            Gate::X { target } | Gate::Mcx { target, .. } => {
                self.for_pairs(target, pattern, std::mem::swap)
            }
            Gate::H { target } => self.for_pairs(target, pattern, |a, b| {
                let (x, y) = (*a, *b);
                *a = (x + y) * FRAC_1_SQRT_2;
                *b = (x - y) * FRAC_1_SQRT_2;
            }),
            Gate::Ry { target, angle, .. } => {
                let (c, s) = ry_coefficients(angle);
                self.for_pairs(target, pattern, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                })
            }
            Gate::T { target } | Gate::Tdg { target } | Gate::Mcz { target, .. } => {
                let phase = phase_of(gate);
                self.for_pairs(target, pattern, |_, b| *b *= phase)
            }
            Gate::Swap { a, b, .. } => {
                let (ba, bb) = (1u64 << a, 1u64 << b);
                for i in 0..self.amplitudes.len() as u64 {
                    if i & ba != 0 && i & bb == 0 && fires(i, pattern) {
                        self.amplitudes.swap(i as usize, (i ^ ba ^ bb) as usize);
                    }
                }
            }
        }
    }

    fn for_each_amplitude<F: FnMut(u64, C64)>(&self, mut f: F) {
        for (i, &a) in self.amplitudes.iter().enumerate() {
            if a.re != 0.0 || a.im != 0.0 {
                f(i as u64, a);
            }
        }
    }

    fn amplitude(&self, index: u64) -> C64 {
        self.amplitudes[index as usize]
    }

    fn project(&mut self, mask: u64, value: u64, scale: f64) {
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i as u64 & mask == value {
                *a *= scale;
            } else {
                *a = C64::new(0.0, 0.0);
            }
        }
    }
}

fn phase_of(gate: &Gate) -> C64 {
    match gate {
        Gate::T { .. } => C64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
        Gate::Tdg { .. } => C64::from_polar(1.0, -std::f64::consts::FRAC_PI_4),
        _ => C64::new(-1.0, 0.0),
    }
}

/// Basis states with nonzero amplitude, kept sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    layout: RegisterLayout,
    entries: Vec<(u64, C64)>,
}

impl SparseState {
    pub fn zero(layout: &RegisterLayout) -> Result<Self> {
        Self::basis(layout, 0)
    }

    pub fn basis(layout: &RegisterLayout, index: u64) -> Result<Self> {
        let k = layout.qubit_count();
        if k > MAX_SPARSE_QUBITS {
            return Err(Error::Guard(format!(
                "{k} qubits exceed the 64-bit basis index limit of {MAX_SPARSE_QUBITS}"
            )));
        }
        Ok(SparseState {
            layout: layout.clone(),
            entries: vec![(index, C64::new(1.0, 0.0))],
        })
    }

    /// Build from arbitrary `(index, amplitude)` pairs; duplicates add up.
    pub fn from_entries(layout: &RegisterLayout, entries: Vec<(u64, C64)>) -> Result<Self> {
        let mut s = SparseState::zero(layout)?;
        s.entries = entries;
        s.normalize_storage();
        Ok(s)
    }

    pub fn from_dense(state: &DenseState) -> Self {
        let mut entries = Vec::new();
        state.for_each_amplitude(|i, a| entries.push((i, a)));
        let mut s = SparseState {
            layout: state.layout().clone(),
            entries,
        };
        s.normalize_storage();
        s
    }

    pub fn entries(&self) -> &[(u64, C64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &SparseState) -> C64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = C64::new(0.0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, b) = (self.entries[i], other.entries[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a.1.conj() * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// `self + factor * other`.
    pub fn add_scaled(&mut self, factor: C64, other: &SparseState) {
        self.entries
            .extend(other.entries.iter().map(|&(i, a)| (i, a * factor)));
        self.normalize_storage();
    }

    pub fn scale(&mut self, factor: C64) {
        for e in &mut self.entries {
            e.1 *= factor;
        }
        self.entries.retain(|e| e.1.norm() >= SPARSE_CUTOFF);
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &SparseState) -> f64 {
        let mut diff = self.clone();
        diff.add_scaled(C64::new(-1.0, 0.0), other);
        diff.norm_sqr().sqrt()
    }

    /// Sort, merge duplicate indices and drop negligible amplitudes.
    fn normalize_storage(&mut self) {
        self.entries.sort_by_key(|e| e.0);
        let mut out: Vec<(u64, C64)> = Vec::with_capacity(self.entries.len());
        for &(i, a) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => out.push((i, a)),
            }
        }
        out.retain(|e| e.1.norm() >= SPARSE_CUTOFF);
        self.entries = out;
    }

    fn permute(&mut self, f: impl Fn(u64) -> u64) {
        let mut sorted = true;
        let mut prev = None;
        for e in &mut self.entries {
            e.0 = f(e.0);
            if prev.is_some_and(|p| p > e.0) {
                sorted = false;
            }
            prev = Some(e.0);
        }
        if !sorted {
            self.entries.sort_by_key(|e| e.0);
        }
    }

    fn mix(&mut self, target: usize, pattern: (u64, u64), m: [[f64; 2]; 2]) {
        let t = 1u64 << target;
        let mut out = Vec::with_capacity(self.entries.len() * 2);
        for &(i, a) in &self.entries {
            if !fires(i, pattern) {
                out.push((i, a));
            } else if i & t == 0 {
                out.push((i, a * m[0][0]));
                out.push((i | t, a * m[1][0]));
            } else {
                out.push((i & !t, a * m[0][1]));
                out.push((i, a * m[1][1]));
            }
        }
        self.entries = out;
        self.normalize_storage();
    }
}

impl QuantumState for SparseState {
    fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    fn apply_gate(&mut self, gate: &Gate) {
        let pattern = control_pattern(gate.controls());
        match *gate {
            Gate::X { target } | Gate::Mcx { target, .. } => {
                let t = 1u64 << target;
                self.permute(|i| if fires(i, pattern) { i ^ t } else { i })
            }
            Gate::Swap { a, b, .. } => {
                let (ba, bb) = (1u64 << a, 1u64 << b);
                self.permute(|i| {
                    if fires(i, pattern) && ((i & ba == 0) != (i & bb == 0)) {
                        i ^ ba ^ bb
                    } else {
                        i
                    }
                })
            }
            Gate::H { target } => self.mix(
                target,
                pattern,
                [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]],
            ),
            Gate::Ry { target, angle, .. } => {
                let (c, s) = ry_coefficients(angle);
                self.mix(target, pattern, [[c, -s], [s, c]])
            }
            Gate::T { target } | Gate::Tdg { target } | Gate::Mcz { target, .. } => {
                let t = 1u64 << target;
                let phase = phase_of(gate);
                for e in &mut self.entries {
                    if e.0 & t != 0 && fires(e.0, pattern) {
                        e.1 *= phase;
                    }
                }
            }
        }
    }

    fn for_each_amplitude<F: FnMut(u64, C64)>(&self, mut f: F) {
        for &(i, a) in &self.entries {
            f(i, a);
        }
    }

    fn amplitude(&self, index: u64) -> C64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map_or(C64::new(0.0, 0.0), |p| self.entries[p].1)
    }

    fn project(&mut self, mask: u64, value: u64, scale: f64) {
        self.entries.retain(|e| e.0 & mask == value);
        for e in &mut self.entries {
            e.1 *= scale;
        }
    }
}

/// The all-zeros state on the dense backend.
pub fn init_zero(layout: &RegisterLayout) -> Result<DenseState> {
    DenseState::zero(layout)
}

/// Uniform superposition over the search space in S with the objective
/// value computed into F.
pub fn prepare_initial<S: QuantumState>(instance: &IlpInstance, walk: &WalkLayout, mut zero: S) -> Result<S> {
    let circuit = crate::walk::synth_initial(instance, walk)?;
    zero.apply_circuit(&circuit)?;
    Ok(zero)
}

/// One row of an S-register marginal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalEntry {
    pub point: Vec<i64>,
    pub probability: f64,
    pub feasible: bool,
    pub f_value: i128,
}

/// Probability of every point of the search space held in S, in bit-pattern
/// order, decoded through `instance`.
pub fn marginal<S: QuantumState>(state: &S, instance: &IlpInstance, walk: &WalkLayout) -> Result<Vec<MarginalEntry>> {
    let probs = state.register_distribution(&walk.s)?;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let point = instance.decode_index(i as u64);
            MarginalEntry {
                feasible: instance.is_feasible(&point),
                f_value: instance.objective_value(&point),
                probability: p,
                point,
            }
        })
        .collect())
}

/// Probability mass with F' or R away from zero.
pub fn ancilla_residual<S: QuantumState>(state: &S, walk: &WalkLayout) -> f64 {
    state.mass_outside(walk.f_prime.mask() | walk.r.mask())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout(k: usize) -> RegisterLayout {
        RegisterLayout::sequential(&[("q", k)])
    }

    #[test]
    fn zero_state() {
        let s = init_zero(&layout(3)).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert_eq!(s.amplitudes()[0], C64::new(1.0, 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(matches!(init_zero(&layout(27)), Err(Error::Guard(_))));
    }

    #[test]
    fn hadamard_twice_is_identity() {
        let mut s = DenseState::basis(&layout(2), 2).unwrap();
        s.apply_gate(&Gate::h(0));
        s.apply_gate(&Gate::h(0));
        assert!((s.amplitude(2) - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn measuring_a_definite_coin() {
        let mut s = SparseState::basis(&layout(2), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = s.measure_qubits(&[0], &mut rng).unwrap();
        assert_eq!(m.bits, 0);
        assert_eq!(m.probability, 1.0);
        assert_eq!(s.entries(), &[(2, C64::new(1.0, 0.0))]);
    }

    #[test]
    fn measuring_half_of_a_uniform_pair() {
        let mut s = DenseState::zero(&layout(2)).unwrap();
        s.apply_gate(&Gate::h(0));
        s.apply_gate(&Gate::h(1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = s.measure_qubits(&[1], &mut rng).unwrap();
        assert!((m.probability - 0.5).abs() < 1e-15);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
        // the measured qubit is reset
        assert_eq!(s.mass_outside(0b10), 0.0);
    }

    #[test]
    fn zero_mass_is_an_error() {
        let mut s = SparseState::zero(&layout(1)).unwrap();
        s.project(1, 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(s.measure_qubits(&[0], &mut rng), Err(Error::ZeroMass)));
    }

    #[test]
    fn layouts_must_match() {
        let mut s = SparseState::zero(&layout(2)).unwrap();
        let c = QuantumCircuit::new(layout(3));
        assert!(s.apply_circuit(&c).is_err());
    }
}
