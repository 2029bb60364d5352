//! Reversible two's-complement arithmetic: negation, increment, ripple-carry
//! addition, sign extension and linear forms.
//!
//! The `*_gates` functions return raw gate lists over explicit qubit
//! indices. The `synth_*` wrappers validate them against a layout.

use crate::circuit::{Control, Gate, QuantumCircuit, RegisterLayout};
use crate::error::CircuitError;
use crate::ilp::LinearForm;

/// Ancillas shared by every adder: one carry-in line and the sign-extension
/// scratch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderAncillas {
    pub carry: usize,
    pub scratch: Vec<usize>,
}

/// Reverse a gate list and invert each gate.
pub fn inverse_gates(gates: &[Gate]) -> Vec<Gate> {
    gates.iter().rev().map(Gate::inverse).collect()
}

/// `|v> -> |v + 1 mod 2^w>` when every extra control fires.
pub fn increment_gates(reg: &[usize], extra: &[Control]) -> Vec<Gate> {
    (0..reg.len())
        .rev()
        .map(|i| {
            let mut controls: Vec<Control> = reg[..i].iter().map(|&q| Control::pos(q)).collect();
            controls.extend_from_slice(extra);
            if controls.is_empty() {
                Gate::x(reg[i])
            } else {
                Gate::mcx(reg[i], controls)
            }
        })
        .collect()
}

/// `|v> -> |-v mod 2^w>`: flip every bit, then add one.
pub fn negate_gates(reg: &[usize]) -> Vec<Gate> {
    let mut gates: Vec<Gate> = reg.iter().map(|&q| Gate::x(q)).collect();
    gates.extend(increment_gates(reg, &[]));
    gates
}

fn maj(x: usize, y: usize, z: usize, out: &mut Vec<Gate>) {
    out.push(Gate::cx(z, y));
    out.push(Gate::cx(z, x));
    out.push(Gate::ccx(x, y, z));
}

fn uma(x: usize, y: usize, z: usize, out: &mut Vec<Gate>) {
    out.push(Gate::ccx(x, y, z));
    out.push(Gate::cx(z, x));
    out.push(Gate::cx(x, y));
}

/// Ripple-carry adder `|a>|b>|c> -> |a>|a + b + c mod 2^m>|c>` with no
/// carry-out line.
pub fn cdkm_add_gates(a: &[usize], b: &[usize], carry: usize) -> Vec<Gate> {
    assert_eq!(a.len(), b.len(), "adder operands must have equal width");
    let m = a.len();
    let mut gates = Vec::with_capacity(6 * m);
    if m == 0 {
        return gates;
    }
    maj(carry, b[0], a[0], &mut gates);
    for i in 1..m {
        maj(a[i - 1], b[i], a[i], &mut gates);
    }
    for i in (1..m).rev() {
        uma(a[i - 1], b[i], a[i], &mut gates);
    }
    uma(carry, b[0], a[0], &mut gates);
    gates
}

/// Copy the sign bit of `src` into every scratch qubit.
pub fn sign_extend_gates(src: &[usize], scratch: &[usize]) -> Vec<Gate> {
    let sign = *src.last().expect("sign extension of an empty register");
    scratch.iter().map(|&s| Gate::cx(sign, s)).collect()
}

/// `b <- b - a mod 2^m` as `b + not(a) + 1` through the carry-in.
pub fn subtract_gates(a: &[usize], b: &[usize], carry: usize) -> Vec<Gate> {
    let mut gates: Vec<Gate> = a.iter().map(|&q| Gate::x(q)).collect();
    gates.push(Gate::x(carry));
    gates.extend(cdkm_add_gates(a, b, carry));
    gates.push(Gate::x(carry));
    gates.extend(a.iter().map(|&q| Gate::x(q)));
    gates
}

/// `|x>|v> -> |x>|v + c x mod 2^w>` by `|c|` adder passes.
pub fn accumulate_term_gates(
    coeff: i64,
    var: &[usize],
    acc: &[usize],
    anc: &AdderAncillas,
) -> Vec<Gate> {
    if coeff == 0 || acc.is_empty() {
        return Vec::new();
    }
    let w = acc.len();
    let d = var.len();
    let (operand, extension): (Vec<usize>, Vec<Gate>) = if w <= d {
        (var[..w].to_vec(), Vec::new())
    } else {
        assert!(
            anc.scratch.len() >= w - d,
            "need {} scratch qubits, have {}",
            w - d,
            anc.scratch.len()
        );
        let scratch = &anc.scratch[..w - d];
        let mut op = var.to_vec();
        op.extend_from_slice(scratch);
        (op, sign_extend_gates(var, scratch))
    };

    let mut gates = Vec::new();
    if coeff < 0 {
        gates.extend(var.iter().map(|&q| Gate::x(q)));
        gates.push(Gate::x(anc.carry));
    }
    gates.extend(extension.iter().cloned());
    let pass = cdkm_add_gates(&operand, acc, anc.carry);
    for _ in 0..coeff.unsigned_abs() {
        gates.extend(pass.iter().cloned());
    }
    gates.extend(inverse_gates(&extension));
    if coeff < 0 {
        gates.push(Gate::x(anc.carry));
        gates.extend(var.iter().map(|&q| Gate::x(q)));
    }
    gates
}

/// `|x>|v> -> |x>|v + form(x) mod 2^w>`; `vars[i]` holds variable `i`.
pub fn linear_form_gates(
    form: &LinearForm,
    vars: &[Vec<usize>],
    acc: &[usize],
    anc: &AdderAncillas,
) -> Vec<Gate> {
    assert_eq!(form.len(), vars.len(), "one register per variable");
    let mut gates = Vec::new();
    let c0 = form.constant as u64;
    for (i, &q) in acc.iter().enumerate() {
        if i < 64 && (c0 >> i) & 1 == 1 || i >= 64 && form.constant < 0 {
            gates.push(Gate::x(q));
        }
    }
    for (&c, var) in form.coefficients.iter().zip(vars) {
        gates.extend(accumulate_term_gates(c, var, acc, anc));
    }
    gates
}

pub fn synth_negate(layout: &RegisterLayout, reg: &[usize]) -> Result<QuantumCircuit, CircuitError> {
    QuantumCircuit::from_gates(layout.clone(), negate_gates(reg))
}

pub fn synth_increment(
    layout: &RegisterLayout,
    reg: &[usize],
    extra_controls: &[Control],
) -> Result<QuantumCircuit, CircuitError> {
    QuantumCircuit::from_gates(layout.clone(), increment_gates(reg, extra_controls))
}

pub fn synth_cdkm_add(
    layout: &RegisterLayout,
    a: &[usize],
    b: &[usize],
    carry: usize,
) -> Result<QuantumCircuit, CircuitError> {
    QuantumCircuit::from_gates(layout.clone(), cdkm_add_gates(a, b, carry))
}

pub fn synth_sign_extend(
    layout: &RegisterLayout,
    src: &[usize],
    scratch: &[usize],
) -> Result<QuantumCircuit, CircuitError> {
    QuantumCircuit::from_gates(layout.clone(), sign_extend_gates(src, scratch))
}

pub fn synth_accumulate_term(
    layout: &RegisterLayout,
    coeff: i64,
    var: &[usize],
    acc: &[usize],
    anc: &AdderAncillas,
) -> Result<QuantumCircuit, CircuitError> {
    QuantumCircuit::from_gates(layout.clone(), accumulate_term_gates(coeff, var, acc, anc))
}

pub fn synth_linear_form(
    layout: &RegisterLayout,
    form: &LinearForm,
    vars: &[Vec<usize>],
    acc: &[usize],
    anc: &AdderAncillas,
) -> Result<QuantumCircuit, CircuitError> {
    QuantumCircuit::from_gates(layout.clone(), linear_form_gates(form, vars, acc, anc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_gate_order() {
        let g = negate_gates(&[0, 1, 2]);
        assert_eq!(g.len(), 6);
        assert!(g[..3].iter().all(|g| matches!(g, Gate::X { .. })));
        assert_eq!(g[3], Gate::ccx(0, 1, 2));
        assert_eq!(g[4], Gate::cx(0, 1));
        assert_eq!(g[5], Gate::x(0));
    }

    #[test]
    fn zero_coefficient_is_empty() {
        let anc = AdderAncillas {
            carry: 9,
            scratch: vec![10],
        };
        assert!(accumulate_term_gates(0, &[0, 1], &[2, 3, 4], &anc).is_empty());
    }
}
