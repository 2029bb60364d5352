//! The walk operator: proposal V, acceptance B, conditional shift F and
//! reflection R, composed into one Metropolis step W.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::arith::{
    increment_gates, inverse_gates, linear_form_gates, subtract_gates, AdderAncillas,
};
use crate::circuit::{Control, Gate, QuantumCircuit, WalkLayout};
use crate::error::{Error, Result};
use crate::ilp::{IlpInstance, LinearForm, Sense};

/// Largest data width for which the exact coin table is synthesized. The
/// exact coin needs one multi-controlled rotation per representable value.
pub const MAX_EXACT_DATA_WIDTH: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceMode {
    /// `min(1, exp(-beta * df))` through one rotation per value of `df`.
    Exact,
    /// A single fitted slope per data bit; monotone in `df`.
    Linear,
}

impl fmt::Display for AcceptanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcceptanceMode::Exact => "exact",
            AcceptanceMode::Linear => "linear",
        })
    }
}

impl FromStr for AcceptanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(AcceptanceMode::Exact),
            "linear" => Ok(AcceptanceMode::Linear),
            other => Err(Error::Config(format!(
                "unknown acceptance mode `{other}`, expected exact or linear"
            ))),
        }
    }
}

/// Coin rotation angles realizing an acceptance rule on `data_width` bits
/// of objective difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceModel {
    pub mode: AcceptanceMode,
    pub beta: f64,
    pub data_width: u32,
    /// Fitted slope `c` of the total angle `pi - c v` (Linear mode).
    pub linear_slope: f64,
    /// Total coin angle for each `v` in `0..=v_max` (Exact mode).
    pub per_value_angles: Vec<f64>,
}

/// `2 asin(min(1, exp(-beta v / 2)))`, the coin angle whose |1> weight is
/// the Metropolis acceptance of an uphill step `v`.
pub fn target_angle(beta: f64, v: u64) -> f64 {
    2.0 * (-beta * v as f64 / 2.0).exp().min(1.0).asin()
}

impl AcceptanceModel {
    pub fn v_max(&self) -> u64 {
        crate::ilp::low_mask(self.data_width)
    }

    /// Total rotation angle applied to the coin for a nonnegative difference.
    pub fn coin_angle(&self, v: u64) -> f64 {
        let v = v.min(self.v_max());
        match self.mode {
            AcceptanceMode::Exact => self.per_value_angles[v as usize],
            AcceptanceMode::Linear => PI - self.linear_slope * v as f64,
        }
    }

    /// Probability of accepting a move that changes the objective by `delta`.
    pub fn acceptance(&self, delta: i128) -> f64 {
        if delta <= 0 {
            return 1.0;
        }
        let half = self.coin_angle(delta.min(u64::MAX as i128) as u64) / 2.0;
        let s = half.sin();
        s * s
    }

    /// Per-bit rotation angles `-c 2^j` (Linear mode).
    pub fn per_bit_angles(&self) -> Vec<f64> {
        (0..self.data_width)
            .map(|j| -self.linear_slope * (j as f64).exp2())
            .collect()
    }
}

/// Fit the coin rotations for inverse temperature `beta`.
pub fn fit_acceptance(beta: f64, data_width: u32, mode: AcceptanceMode) -> Result<AcceptanceModel> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Config(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }
    if data_width > 62 || (mode == AcceptanceMode::Exact && data_width > MAX_EXACT_DATA_WIDTH) {
        return Err(Error::Guard(format!(
            "{data_width} data bits exceed the {mode} acceptance limit"
        )));
    }
    let v_max = crate::ilp::low_mask(data_width);
    let mut model = AcceptanceModel {
        mode,
        beta,
        data_width,
        linear_slope: 0.0,
        per_value_angles: Vec::new(),
    };
    match mode {
        AcceptanceMode::Exact => {
            model.per_value_angles = (0..=v_max).map(|v| target_angle(beta, v)).collect();
        }
        AcceptanceMode::Linear if v_max > 0 => {
            // least squares of pi - c v against the target, intercept pinned
            // at pi so that v = 0 is always accepted
            let (mut num, mut den) = (0.0, 0.0);
            for v in 0..=v_max {
                let vf = v as f64;
                num += vf * (PI - target_angle(beta, v));
                den += vf * vf;
            }
            let fitted = (num / den).max(0.0);
            model.linear_slope = fitted.min(PI / v_max as f64);
        }
        AcceptanceMode::Linear => {}
    }
    Ok(model)
}

fn ancillas(wl: &WalkLayout) -> AdderAncillas {
    AdderAncillas {
        carry: wl.carry.start,
        scratch: wl.scratch.qubits(),
    }
}

fn circuit(wl: &WalkLayout, gates: Vec<Gate>) -> Result<QuantumCircuit> {
    Ok(QuantumCircuit::from_gates(wl.layout.clone(), gates)?)
}

fn check_instance(instance: &IlpInstance, wl: &WalkLayout) -> Result<()> {
    if wl.variables != instance.variables()
        || wl.bits != instance.bits() as usize
        || wl.constraint_count != instance.constraints().len()
        || wl.value_width < instance.required_value_width() as usize
    {
        return Err(Error::Config(
            "walk layout was not built for this instance".into(),
        ));
    }
    Ok(())
}

fn equality_check_gates(form: &LinearForm, wl: &WalkLayout) -> Vec<Gate> {
    let vars = wl.variables_of(&wl.s_prime);
    let acc = wl.f_prime.qubits();
    let compute = linear_form_gates(form, &vars, &acc, &ancillas(wl));
    let zero_test: Vec<Control> = acc.iter().map(|&q| Control::neg(q)).collect();
    let mut gates = compute.clone();
    gates.extend(increment_gates(&wl.r.qubits(), &zero_test));
    gates.extend(inverse_gates(&compute));
    gates
}

fn inequality_check_gates(form: &LinearForm, wl: &WalkLayout) -> Vec<Gate> {
    let vars = wl.variables_of(&wl.s_prime);
    let acc = wl.f_prime.qubits();
    let compute = linear_form_gates(form, &vars, &acc, &ancillas(wl));
    let mut gates = compute.clone();
    gates.extend(increment_gates(&wl.r.qubits(), &[Control::neg(wl.f_prime.msb())]));
    gates.extend(inverse_gates(&compute));
    gates
}

/// Increment R when `form(S') == 0`, leaving F' clean.
pub fn synth_equality_check(form: &LinearForm, wl: &WalkLayout) -> Result<QuantumCircuit> {
    circuit(wl, equality_check_gates(form, wl))
}

/// Increment R when `form(S') >= 0`, leaving F' clean.
pub fn synth_inequality_check(form: &LinearForm, wl: &WalkLayout) -> Result<QuantumCircuit> {
    circuit(wl, inequality_check_gates(form, wl))
}

/// Uniform proposal on S', constraint count into R, objective into F'.
pub fn synth_v(instance: &IlpInstance, wl: &WalkLayout) -> Result<QuantumCircuit> {
    check_instance(instance, wl)?;
    let mut gates: Vec<Gate> = wl.s_prime.qubits().into_iter().map(Gate::h).collect();
    for c in instance.constraints().iter().filter(|c| c.sense == Sense::Equal) {
        gates.extend(equality_check_gates(&c.form, wl));
    }
    for c in instance
        .constraints()
        .iter()
        .filter(|c| c.sense == Sense::GreaterEqual)
    {
        gates.extend(inequality_check_gates(&c.form, wl));
    }
    gates.extend(linear_form_gates(
        instance.objective(),
        &wl.variables_of(&wl.s_prime),
        &wl.f_prime.qubits(),
        &ancillas(wl),
    ));
    Ok(circuit(wl, gates)?.labelled("V"))
}

/// Coin rotation from the objective difference, with F' restored.
pub fn synth_b(instance: &IlpInstance, wl: &WalkLayout, model: &AcceptanceModel) -> Result<QuantumCircuit> {
    check_instance(instance, wl)?;
    let w = wl.value_width;
    if model.data_width as usize + 1 != w {
        return Err(Error::Config(format!(
            "acceptance model has {} data bits, the layout needs {}",
            model.data_width,
            w - 1
        )));
    }
    let f = wl.f.qubits();
    let fp = wl.f_prime.qubits();
    let coin = wl.coin();
    let sign = Control::neg(wl.f_prime.msb());
    let difference = subtract_gates(&f, &fp, wl.carry.start);

    let mut gates = difference.clone();
    gates.push(Gate::ry(coin, PI, vec![]));
    match model.mode {
        AcceptanceMode::Linear => {
            for (j, theta) in model.per_bit_angles().into_iter().enumerate() {
                gates.push(Gate::ry(coin, theta, vec![Control::pos(fp[j]), sign]));
            }
        }
        AcceptanceMode::Exact => {
            for v in 1..=model.v_max() {
                let mut controls: Vec<Control> = (0..model.data_width as usize)
                    .map(|j| Control {
                        qubit: fp[j],
                        positive: v >> j & 1 == 1,
                    })
                    .collect();
                controls.push(sign);
                gates.push(Gate::ry(coin, model.per_value_angles[v as usize] - PI, controls));
            }
        }
    }
    gates.extend(inverse_gates(&difference));
    Ok(circuit(wl, gates)?.labelled("B"))
}

/// Swap (S, F) with (S', F') when the coin is set and R holds the full
/// constraint count.
pub fn synth_shift(instance: &IlpInstance, wl: &WalkLayout) -> Result<QuantumCircuit> {
    check_instance(instance, wl)?;
    let m = instance.constraints().len() as u64;
    let mut controls = vec![Control::pos(wl.coin())];
    controls.extend(wl.r.qubits().into_iter().enumerate().map(|(j, q)| Control {
        qubit: q,
        positive: m >> j & 1 == 1,
    }));
    let pairs = wl
        .s
        .qubits()
        .into_iter()
        .zip(wl.s_prime.qubits())
        .chain(wl.f.qubits().into_iter().zip(wl.f_prime.qubits()));
    let gates = pairs
        .map(|(a, b)| Gate::Swap {
            a,
            b,
            controls: controls.clone(),
        })
        .collect();
    Ok(circuit(wl, gates)?.labelled("F"))
}

/// `2|0><0| - I` on (S', C), identity on every other register.
pub fn synth_reflection(wl: &WalkLayout) -> Result<QuantumCircuit> {
    let coin = wl.coin();
    let z = Gate::Mcz {
        target: coin,
        controls: vec![],
    };
    let gates = vec![
        Gate::x(coin),
        Gate::Mcz {
            target: coin,
            controls: wl.s_prime.qubits().into_iter().map(Control::neg).collect(),
        },
        Gate::x(coin),
        // Z X Z X = -I turns I - 2|0><0| into 2|0><0| - I
        z.clone(),
        Gate::x(coin),
        z,
        Gate::x(coin),
    ];
    Ok(circuit(wl, gates)?.labelled("R"))
}

/// One walk step `W = R V' B' F B V` (primes are inverses), applied right
/// to left, i.e. V first.
pub fn synth_w(instance: &IlpInstance, wl: &WalkLayout, model: &AcceptanceModel) -> Result<QuantumCircuit> {
    let v = synth_v(instance, wl)?;
    let b = synth_b(instance, wl, model)?;
    let f = synth_shift(instance, wl)?;
    let r = synth_reflection(wl)?;
    let mut w = v.clone();
    w.extend(&b)?;
    w.extend(&f)?;
    w.extend(&b.inverse())?;
    w.extend(&v.inverse())?;
    w.extend(&r)?;
    Ok(w)
}

/// `W` without the final reflection: `V' B' F B V`.
pub fn synth_transition(instance: &IlpInstance, wl: &WalkLayout, model: &AcceptanceModel) -> Result<QuantumCircuit> {
    let v = synth_v(instance, wl)?;
    let b = synth_b(instance, wl, model)?;
    let mut u = v.clone();
    u.extend(&b)?;
    u.extend(&synth_shift(instance, wl)?)?;
    u.extend(&b.inverse())?;
    u.extend(&v.inverse())?;
    Ok(u)
}

/// Hadamards on S followed by the objective into F.
pub fn synth_initial(instance: &IlpInstance, wl: &WalkLayout) -> Result<QuantumCircuit> {
    check_instance(instance, wl)?;
    let mut gates: Vec<Gate> = wl.s.qubits().into_iter().map(Gate::h).collect();
    gates.extend(linear_form_gates(
        instance.objective(),
        &wl.variables_of(&wl.s),
        &wl.f.qubits(),
        &ancillas(wl),
    ));
    circuit(wl, gates)
}

/// Acceptance model matching the layout of `wl`.
pub fn model_for(wl: &WalkLayout, beta: f64, mode: AcceptanceMode) -> Result<AcceptanceModel> {
    fit_acceptance(beta, wl.value_width as u32 - 1, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hot_limit_is_flat() {
        let m = fit_acceptance(0.0, 4, AcceptanceMode::Linear).unwrap();
        assert_eq!(m.linear_slope, 0.0);
        for v in 0..16 {
            assert!((m.acceptance(v) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_fit_accepts_zero_exactly() {
        let m = fit_acceptance(1.0, 4, AcceptanceMode::Linear).unwrap();
        assert_eq!(m.coin_angle(0), PI);
        assert_eq!(m.acceptance(0), 1.0);
        let mut prev = 1.0;
        for v in 1..=15 {
            let a = m.acceptance(v);
            assert!(a <= prev);
            prev = a;
        }
    }

    #[test]
    fn exact_angles() {
        let m = fit_acceptance(1.0, 3, AcceptanceMode::Exact).unwrap();
        assert_eq!(m.per_value_angles.len(), 8);
        assert!((m.acceptance(2) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(m.acceptance(-5), 1.0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("exact".parse::<AcceptanceMode>().unwrap(), AcceptanceMode::Exact);
        assert!("fast".parse::<AcceptanceMode>().is_err());
    }
}
