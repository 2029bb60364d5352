//! Gate-level circuits over named registers and the Toffoli-equivalent cost
//! model.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::ops::Range;

use serde::Serialize;

use crate::error::CircuitError;
use crate::ilp::IlpInstance;

/// A contiguous run of qubits, least significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Register {
    pub name: String,
    pub start: usize,
    pub width: usize,
}

impl Register {
    pub fn new(name: impl Into<String>, start: usize, width: usize) -> Self {
        Register {
            name: name.into(),
            start,
            width,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        (self.start..self.start + self.width).collect()
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.width
    }

    /// Qubit holding bit `i` of the register.
    pub fn bit(&self, i: usize) -> usize {
        assert!(i < self.width, "bit {i} outside register {}", self.name);
        self.start + i
    }

    /// The most significant qubit (the sign bit for signed values).
    pub fn msb(&self) -> usize {
        self.bit(self.width - 1)
    }

    /// Bit mask of the register inside a basis index.
    pub fn mask(&self) -> u64 {
        crate::ilp::low_mask(self.width as u32) << self.start
    }

    /// Unsigned value of the register inside basis index `index`.
    pub fn read(&self, index: u64) -> u64 {
        if self.width == 0 {
            0
        } else {
            (index >> self.start) & crate::ilp::low_mask(self.width as u32)
        }
    }

    /// Two's-complement value of the register inside `index`.
    pub fn read_signed(&self, index: u64) -> i64 {
        if self.width == 0 {
            0
        } else {
            crate::ilp::sign_extend(self.read(index), self.width as u32)
        }
    }

    /// `index` with the register overwritten by `value mod 2^width`.
    pub fn write(&self, index: u64, value: i64) -> u64 {
        if self.width == 0 {
            return index;
        }
        let m = crate::ilp::low_mask(self.width as u32);
        (index & !self.mask()) | ((value as u64 & m) << self.start)
    }
}

/// Disjoint registers covering qubits `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    total: usize,
}

impl RegisterLayout {
    pub fn new(registers: Vec<Register>) -> Result<Self, CircuitError> {
        let mut sorted: Vec<&Register> = registers.iter().filter(|r| r.width > 0).collect();
        sorted.sort_by_key(|r| r.start);
        let mut next = 0;
        for r in &sorted {
            if r.start < next {
                return Err(CircuitError::OverlappingRegisters(r.name.clone()));
            }
            if r.start > next {
                return Err(CircuitError::LayoutGap(next));
            }
            next = r.start + r.width;
        }
        for (i, r) in registers.iter().enumerate() {
            if registers[..i].iter().any(|o| o.name == r.name) {
                return Err(CircuitError::DuplicateRegister(r.name.clone()));
            }
        }
        Ok(RegisterLayout {
            registers,
            total: next,
        })
    }

    /// Registers laid out back to back in the given order.
    pub fn sequential(widths: &[(&str, usize)]) -> Self {
        let mut start = 0;
        let registers = widths
            .iter()
            .map(|&(name, width)| {
                let r = Register::new(name, start, width);
                start += width;
                r
            })
            .collect();
        RegisterLayout::new(registers).expect("sequential layouts are valid")
    }

    pub fn qubit_count(&self) -> usize {
        self.total
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }
}

/// Total number of qubits of `layout`.
pub fn qubit_count(layout: &RegisterLayout) -> usize {
    layout.qubit_count()
}

/// Register names used by the walk layout.
pub mod names {
    pub const S: &str = "S";
    pub const S_PRIME: &str = "S'";
    pub const F: &str = "F";
    pub const F_PRIME: &str = "F'";
    pub const R: &str = "R";
    pub const C: &str = "C";
    pub const CARRY: &str = "carry";
    pub const SCRATCH: &str = "scratch";
}

/// Register allocation for the walk on a given instance.
///
/// Qubit order is S, S', F, F', R, C, carry, scratch. The carry line and the
/// sign-extension scratch are shared by every adder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalkLayout {
    pub variables: usize,
    pub bits: usize,
    pub value_width: usize,
    pub constraint_count: usize,
    pub s: Register,
    pub s_prime: Register,
    pub f: Register,
    pub f_prime: Register,
    pub r: Register,
    pub c: Register,
    pub carry: Register,
    pub scratch: Register,
    pub layout: RegisterLayout,
}

impl WalkLayout {
    /// Layout for `instance` as given; equality constraints count once, so
    /// callers normally pass an equality-free instance.
    pub fn new(instance: &IlpInstance) -> Self {
        let n = instance.variables();
        let d = instance.bits() as usize;
        let w = instance.required_value_width() as usize;
        let m = instance.constraints().len();
        let r_width = counter_width(m);
        let layout = RegisterLayout::sequential(&[
            (names::S, n * d),
            (names::S_PRIME, n * d),
            (names::F, w),
            (names::F_PRIME, w),
            (names::R, r_width),
            (names::C, 1),
            (names::CARRY, 1),
            (names::SCRATCH, w.saturating_sub(d)),
        ]);
        let get = |name: &str| layout.register(name).unwrap().clone();
        WalkLayout {
            variables: n,
            bits: d,
            value_width: w,
            constraint_count: m,
            s: get(names::S),
            s_prime: get(names::S_PRIME),
            f: get(names::F),
            f_prime: get(names::F_PRIME),
            r: get(names::R),
            c: get(names::C),
            carry: get(names::CARRY),
            scratch: get(names::SCRATCH),
            layout,
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.layout.qubit_count()
    }

    /// Qubits of variable `i` inside an S-type register.
    pub fn variable(&self, block: &Register, i: usize) -> Vec<usize> {
        (block.start + i * self.bits..block.start + (i + 1) * self.bits).collect()
    }

    /// Per-variable qubit lists of an S-type register.
    pub fn variables_of(&self, block: &Register) -> Vec<Vec<usize>> {
        (0..self.variables).map(|i| self.variable(block, i)).collect()
    }

    pub fn coin(&self) -> usize {
        self.c.start
    }

    /// Qubit widths by register name, in layout order.
    pub fn widths(&self) -> BTreeMap<String, usize> {
        self.layout
            .registers()
            .iter()
            .map(|r| (r.name.clone(), r.width))
            .collect()
    }
}

/// Width of the constraint counter, enough to hold the value `m`.
pub fn counter_width(m: usize) -> usize {
    (usize::BITS - m.leading_zeros()) as usize
}

/// A control qubit with its polarity (`true` fires on |1>).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Control {
    pub qubit: usize,
    pub positive: bool,
}

impl Control {
    pub fn pos(qubit: usize) -> Self {
        Control {
            qubit,
            positive: true,
        }
    }

    pub fn neg(qubit: usize) -> Self {
        Control {
            qubit,
            positive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Gate {
    X { target: usize },
    H { target: usize },
    T { target: usize },
    Tdg { target: usize },
    /// Multi-controlled X; one control is a CX.
    Mcx { target: usize, controls: Vec<Control> },
    /// Controlled `RY(angle)`; no controls is a plain rotation.
    Ry { target: usize, angle: f64, controls: Vec<Control> },
    /// Controlled swap of `a` and `b`.
    Swap { a: usize, b: usize, controls: Vec<Control> },
    /// Phase flip of |1> on `target` when the controls fire.
    Mcz { target: usize, controls: Vec<Control> },
}

impl Gate {
    pub fn x(target: usize) -> Self {
        Gate::X { target }
    }

    pub fn h(target: usize) -> Self {
        Gate::H { target }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate::Mcx {
            target,
            controls: vec![Control::pos(control)],
        }
    }

    pub fn ccx(c0: usize, c1: usize, target: usize) -> Self {
        Gate::Mcx {
            target,
            controls: vec![Control::pos(c0), Control::pos(c1)],
        }
    }

    pub fn mcx(target: usize, controls: Vec<Control>) -> Self {
        Gate::Mcx { target, controls }
    }

    pub fn ry(target: usize, angle: f64, controls: Vec<Control>) -> Self {
        Gate::Ry {
            target,
            angle,
            controls,
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        match self {
            Gate::X { target }
            | Gate::H { target }
            | Gate::T { target }
            | Gate::Tdg { target }
            | Gate::Mcx { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Mcz { target, .. } => vec![*target],
            Gate::Swap { a, b, .. } => vec![*a, *b],
        }
    }

    pub fn controls(&self) -> &[Control] {
        match self {
            Gate::Mcx { controls, .. }
            | Gate::Ry { controls, .. }
            | Gate::Swap { controls, .. }
            | Gate::Mcz { controls, .. } => controls,
            _ => &[],
        }
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::T { target } => Gate::Tdg { target: *target },
            Gate::Tdg { target } => Gate::T { target: *target },
            Gate::Ry {
                target,
                angle,
                controls,
            } => Gate::Ry {
                target: *target,
                angle: -angle,
                controls: controls.clone(),
            },
            g => g.clone(),
        }
    }

    /// Base kind name, independent of the number of controls.
    pub fn kind(&self) -> &'static str {
        match self {
            Gate::X { .. } => "X",
            Gate::H { .. } => "H",
            Gate::T { .. } => "T",
            Gate::Tdg { .. } => "TDG",
            Gate::Mcx { .. } => "MCX",
            Gate::Ry { .. } => "RY",
            Gate::Swap { .. } => "SWAP",
            Gate::Mcz { .. } => "MCZ",
        }
    }

    fn label(&self) -> String {
        let nc = self.controls().len();
        match self {
            Gate::Mcx { .. } if nc == 0 => "X".into(),
            Gate::Mcx { .. } if nc == 1 => "CX".into(),
            Gate::Ry { angle, .. } if nc == 0 => format!("RY({angle:.12})"),
            Gate::Ry { angle, .. } => format!("CRY({angle:.12})"),
            Gate::Swap { .. } if nc > 0 => "CSWAP".into(),
            Gate::Mcz { .. } if nc == 0 => "Z".into(),
            g => g.kind().into(),
        }
    }

    pub fn validate(&self, total: usize) -> Result<(), CircuitError> {
        if let Gate::Ry { angle, .. } = self {
            if !angle.is_finite() {
                return Err(CircuitError::NonFiniteAngle(*angle));
            }
        }
        let mut seen: Vec<usize> = self.targets();
        seen.extend(self.controls().iter().map(|c| c.qubit));
        for (i, &q) in seen.iter().enumerate() {
            if q >= total {
                return Err(CircuitError::QubitOutOfRange { qubit: q, total });
            }
            if seen[..i].contains(&q) {
                return Err(CircuitError::RepeatedQubit(q));
            }
        }
        Ok(())
    }

    /// Cost in Toffoli equivalents, split into an integer part and a count
    /// of T-type gates (seven of which make one Toffoli).
    pub fn cost(&self) -> GateCost {
        let nc = self.controls().len() as u64;
        let mcx = |n: u64| if n >= 2 { 2 * n - 3 } else { 0 };
        match self {
            Gate::X { .. } | Gate::H { .. } => GateCost::default(),
            Gate::T { .. } | Gate::Tdg { .. } => GateCost { toffoli: 0, t: 1 },
            Gate::Mcx { .. } | Gate::Mcz { .. } => GateCost {
                toffoli: mcx(nc),
                t: 0,
            },
            Gate::Swap { .. } => GateCost {
                toffoli: if nc == 0 { 0 } else { mcx(nc + 1) },
                t: 0,
            },
            Gate::Ry { .. } => GateCost {
                toffoli: if nc >= 1 { 2 * nc - 2 } else { 0 },
                t: 0,
            },
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())?;
        for t in self.targets() {
            write!(f, " {t}")?;
        }
        write!(f, " [")?;
        for (i, c) in self.controls().iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}{}", c.qubit, if c.positive { '+' } else { '-' })?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GateCost {
    pub toffoli: u64,
    pub t: u64,
}

impl GateCost {
    pub fn add(&mut self, other: GateCost) {
        self.toffoli += other.toffoli;
        self.t += other.t;
    }

    pub fn value(&self) -> f64 {
        self.toffoli as f64 + self.t as f64 / 7.0
    }
}

/// Named gate range inside a circuit, used for cost breakdowns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub label: String,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumCircuit {
    layout: RegisterLayout,
    gates: Vec<Gate>,
    segments: Vec<Segment>,
}

impl QuantumCircuit {
    pub fn new(layout: RegisterLayout) -> Self {
        QuantumCircuit {
            layout,
            gates: Vec::new(),
            segments: Vec::new(),
        }
    }

    pub fn from_gates(layout: RegisterLayout, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        let total = layout.qubit_count();
        for g in &gates {
            g.validate(total)?;
        }
        Ok(QuantumCircuit {
            layout,
            gates,
            segments: Vec::new(),
        })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn append(&mut self, gate: Gate) -> Result<(), CircuitError> {
        gate.validate(self.layout.qubit_count())?;
        self.gates.push(gate);
        Ok(())
    }

    /// Mark the whole circuit as one named sub-operator.
    pub fn labelled(mut self, label: &str) -> Self {
        self.segments = vec![Segment {
            label: label.to_string(),
            range: 0..self.gates.len(),
        }];
        self
    }

    /// `self` followed by `other`.
    pub fn compose(&self, other: &QuantumCircuit) -> Result<QuantumCircuit, CircuitError> {
        let mut out = self.clone();
        out.extend(other)?;
        Ok(out)
    }

    pub fn extend(&mut self, other: &QuantumCircuit) -> Result<(), CircuitError> {
        if self.layout != other.layout {
            return Err(CircuitError::LayoutMismatch {
                left: self.layout.qubit_count(),
                right: other.layout.qubit_count(),
            });
        }
        let offset = self.gates.len();
        self.gates.extend(other.gates.iter().cloned());
        self.segments.extend(other.segments.iter().map(|s| Segment {
            label: s.label.clone(),
            range: s.range.start + offset..s.range.end + offset,
        }));
        Ok(())
    }

    /// Reversed gate order with every gate inverted. Segment labels follow
    /// their gates.
    pub fn inverse(&self) -> QuantumCircuit {
        let n = self.gates.len();
        QuantumCircuit {
            layout: self.layout.clone(),
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            segments: self
                .segments
                .iter()
                .rev()
                .map(|s| Segment {
                    label: s.label.clone(),
                    range: n - s.range.end..n - s.range.start,
                })
                .collect(),
        }
    }

    /// One gate per line, `KIND targets [controls]`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let _ = writeln!(out, "{g}");
        }
        out
    }
}

/// Gate counts and Toffoli-equivalent cost of a circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub qubits: usize,
    pub gate_count: usize,
    /// Gate kind, then number of controls, then count.
    pub counts: BTreeMap<String, BTreeMap<usize, usize>>,
    pub toffoli_equivalents: f64,
    pub t_gates: u64,
    /// Cost per labelled sub-operator; gates outside any segment are listed
    /// under "other".
    pub breakdown: BTreeMap<String, f64>,
}

pub fn toffoli_equivalents(circuit: &QuantumCircuit) -> ResourceReport {
    let mut counts: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut total = GateCost::default();
    let mut per_gate = Vec::with_capacity(circuit.len());
    for g in circuit.gates() {
        *counts
            .entry(g.kind().to_string())
            .or_default()
            .entry(g.controls().len())
            .or_default() += 1;
        let c = g.cost();
        total.add(c);
        per_gate.push(c);
    }

    let mut labelled: BTreeMap<String, GateCost> = BTreeMap::new();
    let mut covered = vec![false; circuit.len()];
    for s in circuit.segments() {
        let entry = labelled.entry(s.label.clone()).or_default();
        for i in s.range.clone() {
            if !covered[i] {
                covered[i] = true;
                entry.add(per_gate[i]);
            }
        }
    }
    if !circuit.is_empty() && covered.iter().any(|c| !c) {
        let entry = labelled.entry("other".into()).or_default();
        for (i, c) in per_gate.iter().enumerate() {
            if !covered[i] {
                entry.add(*c);
            }
        }
    }

    ResourceReport {
        qubits: circuit.layout().qubit_count(),
        gate_count: circuit.len(),
        counts,
        toffoli_equivalents: total.value(),
        t_gates: total.t,
        breakdown: labelled.into_iter().map(|(k, v)| (k, v.value())).collect(),
    }
}
