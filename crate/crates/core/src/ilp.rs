//! Integer linear programs in canonical form and the brute-force oracles
//! built on top of them.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, InstanceError, Result};

/// Largest `n·d` for which the search space may be enumerated.
pub const MAX_ENUMERATION_BITS: u32 = 24;
/// Largest feasible region for which the classical chain is materialized.
pub const MAX_CHAIN_STATES: usize = 2048;

const MAX_BITS: i64 = 32;
const MAX_TOTAL_BITS: i64 = 4096;
const MAX_COEFFICIENT: i64 = 1 << 20;
const MAX_CONSTANT: i64 = 1 << 40;

/// `c0 + c1 x1 + ... + cn xn` with exact integer entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LinearForm {
    pub constant: i64,
    pub coefficients: Vec<i64>,
}

impl LinearForm {
    pub fn new(constant: i64, coefficients: Vec<i64>) -> Self {
        LinearForm {
            constant,
            coefficients,
        }
    }

    pub fn zero(variables: usize) -> Self {
        LinearForm::new(0, vec![0; variables])
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// True when every coefficient and the constant vanish.
    pub fn is_zero(&self) -> bool {
        self.constant == 0 && self.coefficients.iter().all(|&c| c == 0)
    }

    pub fn negated(&self) -> Self {
        LinearForm::new(
            -self.constant,
            self.coefficients.iter().map(|c| -c).collect(),
        )
    }

    /// Exact value at `point`. Panics if the lengths differ.
    pub fn evaluate(&self, point: &[i64]) -> i128 {
        assert_eq!(
            point.len(),
            self.coefficients.len(),
            "point length does not match the form"
        );
        self.coefficients
            .iter()
            .zip(point)
            .fold(self.constant as i128, |acc, (&c, &x)| {
                acc + c as i128 * x as i128
            })
    }

    /// Smallest and largest value taken by any prefix `c0 + sum_{k<=j} ck xk`
    /// when every variable ranges over `[lo, hi]`.
    pub fn partial_sum_bounds(&self, lo: i64, hi: i64) -> (i128, i128) {
        let mut cur_lo = self.constant as i128;
        let mut cur_hi = self.constant as i128;
        let (mut min, mut max) = (cur_lo, cur_hi);
        for &c in &self.coefficients {
            let a = c as i128 * lo as i128;
            let b = c as i128 * hi as i128;
            cur_lo += a.min(b);
            cur_hi += a.max(b);
            min = min.min(cur_lo);
            max = max.max(cur_hi);
        }
        (min, max)
    }

    /// Range of the full form over the box `[lo, hi]^n`.
    pub fn range(&self, lo: i64, hi: i64) -> (i128, i128) {
        let mut range = (self.constant as i128, self.constant as i128);
        for &c in &self.coefficients {
            let a = c as i128 * lo as i128;
            let b = c as i128 * hi as i128;
            range.0 += a.min(b);
            range.1 += a.max(b);
        }
        range
    }

    /// Sum of absolute coefficient values, the number of adder passes the
    /// form costs.
    pub fn weight(&self) -> u64 {
        self.coefficients.iter().map(|c| c.unsigned_abs()).sum()
    }
}

/// Exact value of `form` at `point`.
pub fn evaluate_form(form: &LinearForm, point: &[i64]) -> i128 {
    form.evaluate(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sense {
    #[serde(rename = "ge")]
    GreaterEqual,
    #[serde(rename = "eq")]
    Equal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Constraint {
    #[serde(flatten)]
    pub form: LinearForm,
    pub sense: Sense,
}

impl Constraint {
    pub fn ge(form: LinearForm) -> Self {
        Constraint {
            form,
            sense: Sense::GreaterEqual,
        }
    }

    pub fn eq(form: LinearForm) -> Self {
        Constraint {
            form,
            sense: Sense::Equal,
        }
    }

    pub fn is_satisfied(&self, point: &[i64]) -> bool {
        let v = self.form.evaluate(point);
        match self.sense {
            Sense::GreaterEqual => v >= 0,
            Sense::Equal => v == 0,
        }
    }
}

/// Minimize `objective` over `n` integer variables of `d` two's-complement
/// bits each, subject to `constraints`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IlpInstance {
    variables: usize,
    bits: u32,
    objective: LinearForm,
    constraints: Vec<Constraint>,
}

impl IlpInstance {
    pub fn new(
        variables: usize,
        bits: u32,
        objective: LinearForm,
        constraints: Vec<Constraint>,
    ) -> std::result::Result<Self, InstanceError> {
        if variables == 0 {
            return Err(InstanceError::InvalidVariables(0));
        }
        if bits == 0 {
            return Err(InstanceError::InvalidBits(0));
        }
        if bits as i64 > MAX_BITS {
            return Err(InstanceError::OutOfRange {
                field: "bits".into(),
                detail: format!("at most {MAX_BITS}"),
            });
        }
        if variables as i64 * bits as i64 > MAX_TOTAL_BITS {
            return Err(InstanceError::OutOfRange {
                field: "variables".into(),
                detail: format!("variables * bits must not exceed {MAX_TOTAL_BITS}"),
            });
        }
        check_form(&objective, variables, "objective")?;
        for (i, c) in constraints.iter().enumerate() {
            check_form(&c.form, variables, &format!("constraints[{i}]"))?;
        }
        Ok(IlpInstance {
            variables,
            bits,
            objective,
            constraints,
        })
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn objective(&self) -> &LinearForm {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Same instance with a different per-variable bit width.
    pub fn with_bits(&self, bits: u32) -> std::result::Result<Self, InstanceError> {
        IlpInstance::new(
            self.variables,
            bits,
            self.objective.clone(),
            self.constraints.clone(),
        )
    }

    /// Total width `n·d` of the point encoding.
    pub fn encoding_bits(&self) -> u32 {
        self.variables as u32 * self.bits
    }

    /// Inclusive range `[-2^(d-1), 2^(d-1) - 1]` of every variable.
    pub fn domain_bounds(&self) -> (i64, i64) {
        let half = 1i64 << (self.bits - 1);
        (-half, half - 1)
    }

    pub fn equality_count(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.sense == Sense::Equal)
            .count()
    }

    /// Replace each `h = 0` by the pair `h >= 0`, `-h >= 0`.
    pub fn eliminate_equalities(&self) -> IlpInstance {
        let mut constraints = Vec::with_capacity(self.constraints.len() + self.equality_count());
        for c in &self.constraints {
            match c.sense {
                Sense::GreaterEqual => constraints.push(c.clone()),
                Sense::Equal => {
                    constraints.push(Constraint::ge(c.form.clone()));
                    constraints.push(Constraint::ge(c.form.negated()));
                }
            }
        }
        IlpInstance {
            constraints,
            ..self.clone()
        }
    }

    /// Number of constraints met at `point`.
    pub fn satisfied_count(&self, point: &[i64]) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.is_satisfied(point))
            .count()
    }

    pub fn is_feasible(&self, point: &[i64]) -> bool {
        self.constraints.iter().all(|c| c.is_satisfied(point))
    }

    pub fn objective_value(&self, point: &[i64]) -> i128 {
        self.objective.evaluate(point)
    }

    /// Two's-complement bit pattern of `point`, variable `i` in bits
    /// `i·d .. (i+1)·d`.
    pub fn encode_point(&self, point: &[i64]) -> u64 {
        assert!(self.encoding_bits() <= 64, "encoding does not fit 64 bits");
        let d = self.bits;
        let mask = low_mask(d);
        point
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &x)| acc | ((x as u64 & mask) << (i as u32 * d)))
    }

    pub fn decode_index(&self, index: u64) -> Vec<i64> {
        let d = self.bits;
        let mask = low_mask(d);
        (0..self.variables)
            .map(|i| {
                let raw = (index >> (i as u32 * d)) & mask;
                sign_extend(raw, d)
            })
            .collect()
    }

    /// Every point of the search space in bit-pattern order.
    pub fn enumerate_domain(&self) -> Result<Vec<Vec<i64>>> {
        let total = self.encoding_bits();
        if total > MAX_ENUMERATION_BITS {
            return Err(Error::Guard(format!(
                "n*d = {total} exceeds the enumeration limit {MAX_ENUMERATION_BITS}"
            )));
        }
        Ok((0..1u64 << total).map(|i| self.decode_index(i)).collect())
    }

    /// Indices of the feasible points, ascending.
    pub fn feasible_indices(&self) -> Result<Vec<u64>> {
        let total = self.encoding_bits();
        if total > MAX_ENUMERATION_BITS {
            return Err(Error::Guard(format!(
                "n*d = {total} exceeds the enumeration limit {MAX_ENUMERATION_BITS}"
            )));
        }
        Ok((0..1u64 << total)
            .filter(|&i| self.is_feasible(&self.decode_index(i)))
            .collect())
    }

    /// Feasible minimizers and the optimal value.
    pub fn brute_force_optimum(&self) -> Result<(Vec<Vec<i64>>, i128)> {
        let mut best: Option<i128> = None;
        let mut points = Vec::new();
        for i in self.feasible_indices()? {
            let x = self.decode_index(i);
            let v = self.objective_value(&x);
            match best {
                Some(b) if v > b => {}
                Some(b) if v == b => points.push(x),
                _ => {
                    best = Some(v);
                    points = vec![x];
                }
            }
        }
        best.map(|b| (points, b)).ok_or(Error::Infeasible)
    }

    /// Boltzmann weights `exp(-beta f(x))` normalized over the feasible set.
    pub fn gibbs_distribution(&self, beta: f64) -> Result<GibbsTable> {
        check_beta(beta)?;
        let feasible = self.feasible_indices()?;
        if feasible.is_empty() {
            return Err(Error::Infeasible);
        }
        let values: Vec<i128> = feasible
            .iter()
            .map(|&i| self.objective_value(&self.decode_index(i)))
            .collect();
        let fmin = *values.iter().min().unwrap();
        let weights: Vec<f64> = values
            .iter()
            .map(|&v| (-beta * (v - fmin) as f64).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let entries = feasible
            .iter()
            .zip(weights)
            .map(|(&i, w)| GibbsEntry {
                index: i,
                point: self.decode_index(i),
                probability: w / z,
            })
            .collect();
        Ok(GibbsTable { beta, entries })
    }

    /// The Metropolis chain on the feasible set with uniform proposals over
    /// the full search space.
    pub fn classical_chain(&self, beta: f64) -> Result<ClassicalChain> {
        check_beta(beta)?;
        let feasible = self.feasible_indices()?;
        if feasible.is_empty() {
            return Err(Error::Infeasible);
        }
        if feasible.len() > MAX_CHAIN_STATES {
            return Err(Error::Guard(format!(
                "{} feasible points exceed the chain limit {MAX_CHAIN_STATES}",
                feasible.len()
            )));
        }
        let states: Vec<Vec<i64>> = feasible.iter().map(|&i| self.decode_index(i)).collect();
        let values: Vec<i128> = states.iter().map(|x| self.objective_value(x)).collect();
        let proposal = (-(self.encoding_bits() as f64)).exp2();
        let size = states.len();
        let mut matrix = DMatrix::<f64>::zeros(size, size);
        for a in 0..size {
            let mut off = 0.0;
            for b in 0..size {
                if a != b {
                    let p = proposal * metropolis_acceptance(beta, values[b] - values[a]);
                    matrix[(a, b)] = p;
                    off += p;
                }
            }
            matrix[(a, a)] = 1.0 - off;
        }

        // Reversible chains are similar to the symmetric matrix
        // sqrt(M(a,b) M(b,a)), whose top eigenvector squares to the
        // stationary law.
        let symmetric =
            DMatrix::from_fn(size, size, |a, b| (matrix[(a, b)] * matrix[(b, a)]).sqrt());
        let eig = SymmetricEigen::new(symmetric);
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let top = eig.eigenvectors.column(order[0]);
        let norm: f64 = top.iter().map(|v| v * v).sum();
        let stationary = top.iter().map(|v| v * v / norm).collect();
        let gap = if size == 1 {
            1.0
        } else {
            (1.0 - eigenvalues[1]).clamp(0.0, 2.0)
        };
        Ok(ClassicalChain {
            beta,
            indices: feasible,
            states,
            matrix,
            eigenvalues,
            stationary,
            gap,
        })
    }

    /// Smallest two's-complement width holding every prefix sum of every
    /// form and every objective difference.
    pub fn required_value_width(&self) -> u32 {
        let (lo, hi) = self.domain_bounds();
        let (fmin, fmax) = self.objective.range(lo, hi);
        let mut min = fmin - fmax;
        let mut max = fmax - fmin;
        let forms = std::iter::once(&self.objective).chain(self.constraints.iter().map(|c| &c.form));
        for form in forms {
            let (a, b) = form.partial_sum_bounds(lo, hi);
            min = min.min(a);
            max = max.max(b);
        }
        let mut w = 1u32;
        while !(-(1i128 << (w - 1)) <= min && max < (1i128 << (w - 1))) {
            w += 1;
        }
        w
    }
}

/// `min(1, exp(-beta * delta))`.
pub fn metropolis_acceptance(beta: f64, delta: i128) -> f64 {
    if delta <= 0 || beta == 0.0 {
        1.0
    } else {
        (-beta * delta as f64).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsEntry {
    pub index: u64,
    pub point: Vec<i64>,
    pub probability: f64,
}

/// Boltzmann law over the feasible points, in bit-pattern order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsTable {
    pub beta: f64,
    pub entries: Vec<GibbsEntry>,
}

impl GibbsTable {
    pub fn probability(&self, point: &[i64]) -> f64 {
        self.entries
            .iter()
            .find(|e| e.point == point)
            .map_or(0.0, |e| e.probability)
    }

    pub fn probability_of_index(&self, index: u64) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.index)
            .map_or(0.0, |i| self.entries[i].probability)
    }
}

/// Metropolis transition matrix over the feasible set.
#[derive(Debug, Clone)]
pub struct ClassicalChain {
    pub beta: f64,
    /// Bit-pattern index of each state.
    pub indices: Vec<u64>,
    pub states: Vec<Vec<i64>>,
    /// Row-stochastic, `matrix[(a, b)]` is the probability of `a -> b`.
    pub matrix: DMatrix<f64>,
    /// Spectrum in descending order.
    pub eigenvalues: Vec<f64>,
    pub stationary: Vec<f64>,
    /// One minus the second largest eigenvalue.
    pub gap: f64,
}

impl ClassicalChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest deviation of a row sum from one.
    pub fn row_sum_residual(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |p(a) M(a,b) - p(b) M(b,a)|`.
    pub fn detailed_balance_residual(&self, p: &[f64]) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let r = (p[a] * self.matrix[(a, b)] - p[b] * self.matrix[(b, a)]).abs();
                worst = worst.max(r);
            }
        }
        worst
    }
}

/// Parse the JSON instance format.
pub fn parse_instance(text: &str) -> std::result::Result<IlpInstance, InstanceError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| InstanceError::Syntax(e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| InstanceError::WrongType {
        field: "<root>".into(),
        expected: "object",
    })?;

    let variables = int_field(obj.get("variables"), "variables")?;
    if variables < 1 {
        return Err(InstanceError::InvalidVariables(variables));
    }
    let bits = int_field(obj.get("bits"), "bits")?;
    if bits < 1 {
        return Err(InstanceError::InvalidBits(bits));
    }
    if bits > MAX_BITS {
        return Err(InstanceError::OutOfRange {
            field: "bits".into(),
            detail: format!("at most {MAX_BITS}"),
        });
    }
    if variables > MAX_TOTAL_BITS {
        return Err(InstanceError::OutOfRange {
            field: "variables".into(),
            detail: format!("at most {MAX_TOTAL_BITS}"),
        });
    }
    let n = variables as usize;

    let objective = obj
        .get("objective")
        .ok_or_else(|| InstanceError::MissingField("objective".into()))?;
    let objective = parse_form(objective, "objective", n)?;

    let mut constraints = Vec::new();
    match obj.get("constraints") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let field = format!("constraints[{i}]");
                let form = parse_form(item, &field, n)?;
                let sense = match item.get("sense") {
                    None => return Err(InstanceError::MissingField(format!("{field}.sense"))),
                    Some(Value::String(s)) if s == "ge" => Sense::GreaterEqual,
                    Some(Value::String(s)) if s == "eq" => Sense::Equal,
                    Some(other) => {
                        return Err(InstanceError::InvalidSense {
                            field: format!("{field}.sense"),
                            found: other.to_string(),
                        })
                    }
                };
                constraints.push(Constraint { form, sense });
            }
        }
        Some(_) => {
            return Err(InstanceError::WrongType {
                field: "constraints".into(),
                expected: "array",
            })
        }
    }
    IlpInstance::new(n, bits as u32, objective, constraints)
}

fn parse_form(
    value: &Value,
    field: &str,
    n: usize,
) -> std::result::Result<LinearForm, InstanceError> {
    let obj = value.as_object().ok_or_else(|| InstanceError::WrongType {
        field: field.to_string(),
        expected: "object",
    })?;
    let constant = match obj.get("constant") {
        None | Some(Value::Null) => 0,
        some => int_field(some, &format!("{field}.constant"))?,
    };
    let coeff_field = format!("{field}.coefficients");
    let coefficients = match obj.get("coefficients") {
        None => return Err(InstanceError::MissingField(coeff_field)),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| int_field(Some(v), &format!("{coeff_field}[{i}]")))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        Some(_) => {
            return Err(InstanceError::WrongType {
                field: coeff_field,
                expected: "array of integers",
            })
        }
    };
    if coefficients.len() != n {
        return Err(InstanceError::CoefficientCountMismatch {
            field: coeff_field,
            expected: n,
            found: coefficients.len(),
        });
    }
    Ok(LinearForm::new(constant, coefficients))
}

fn int_field(value: Option<&Value>, field: &str) -> std::result::Result<i64, InstanceError> {
    let value = value.ok_or_else(|| InstanceError::MissingField(field.to_string()))?;
    match value {
        Value::Number(num) => num.as_i64().ok_or_else(|| {
            if num.is_f64() {
                InstanceError::NotInteger {
                    field: field.to_string(),
                }
            } else {
                InstanceError::OutOfRange {
                    field: field.to_string(),
                    detail: "does not fit a signed 64-bit integer".into(),
                }
            }
        }),
        _ => Err(InstanceError::NotInteger {
            field: field.to_string(),
        }),
    }
}

fn check_form(
    form: &LinearForm,
    n: usize,
    field: &str,
) -> std::result::Result<(), InstanceError> {
    if form.len() != n {
        return Err(InstanceError::CoefficientCountMismatch {
            field: format!("{field}.coefficients"),
            expected: n,
            found: form.len(),
        });
    }
    if form.constant.abs() > MAX_CONSTANT {
        return Err(InstanceError::OutOfRange {
            field: format!("{field}.constant"),
            detail: "absolute value at most 2^40".into(),
        });
    }
    if let Some(i) = form.coefficients.iter().position(|c| c.abs() > MAX_COEFFICIENT) {
        return Err(InstanceError::OutOfRange {
            field: format!("{field}.coefficients[{i}]"),
            detail: format!("absolute value at most {MAX_COEFFICIENT}"),
        });
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("beta must be finite and nonnegative, got {beta}")))
    }
}

pub(crate) fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Interpret the low `bits` of `raw` as a two's-complement integer.
pub fn sign_extend(raw: u64, bits: u32) -> i64 {
    let raw = raw & low_mask(bits);
    if bits < 64 && raw >> (bits - 1) & 1 == 1 {
        raw as i64 - (1i64 << bits)
    } else {
        raw as i64
    }
}
