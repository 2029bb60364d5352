//! Numerical checks of the walk's spectral properties: unitarity, the Gibbs
//! fixed point, detailed balance and the eigenphase gap.

use nalgebra::{DMatrix, Schur};
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{QuantumCircuit, WalkLayout};
use crate::error::{Error, Result};
use crate::ilp::IlpInstance;
use crate::sim::{QuantumState, SparseState, C64};
use crate::walk::{model_for, synth_transition, synth_w, AcceptanceMode};

/// Largest layout for which the walk matrix is materialized.
pub const MAX_MATRIX_QUBITS: usize = 14;
/// Phases below this magnitude count as eigenvalue one.
pub const UNIT_PHASE_TOLERANCE: f64 = 1e-7;

/// A square unitary stored column by column, each column sparse and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkMatrix {
    pub qubits: usize,
    pub columns: Vec<Vec<(u64, C64)>>,
}

impl WalkMatrix {
    pub fn dimension(&self) -> usize {
        self.columns.len()
    }

    pub fn entry(&self, row: u64, col: usize) -> C64 {
        let c = &self.columns[col];
        c.binary_search_by_key(&row, |e| e.0)
            .map_or(C64::new(0.0, 0.0), |p| c[p].1)
    }

    /// Matrix-vector product on a dense vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dimension()];
        for (j, col) in self.columns.iter().enumerate() {
            if v[j] == C64::new(0.0, 0.0) {
                continue;
            }
            for &(i, a) in col {
                out[i as usize] += a * v[j];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        if self.qubits > 12 {
            return Err(Error::Guard(format!(
                "dense matrix of {} qubits exceeds the 12 qubit limit",
                self.qubits
            )));
        }
        let n = self.dimension();
        let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                m[(i as usize, j)] = a;
            }
        }
        Ok(m)
    }
}

fn matrix_guard(qubits: usize) -> Result<()> {
    if qubits > MAX_MATRIX_QUBITS {
        return Err(Error::Guard(format!(
            "the walk needs {qubits} qubits, the matrix limit is {MAX_MATRIX_QUBITS}"
        )));
    }
    Ok(())
}

/// Columns of the unitary implemented by `circuit`.
pub fn circuit_matrix(circuit: &QuantumCircuit) -> Result<WalkMatrix> {
    let qubits = circuit.layout().qubit_count();
    matrix_guard(qubits)?;
    let columns = (0..1u64 << qubits)
        .into_par_iter()
        .map(|j| {
            let mut s = SparseState::basis(circuit.layout(), j)?;
            s.apply_circuit(circuit)?;
            Ok(s.entries().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WalkMatrix { qubits, columns })
}

/// The walk operator of `instance` at `beta` as a matrix.
pub fn build_walk_matrix(instance: &IlpInstance, beta: f64, mode: AcceptanceMode) -> Result<WalkMatrix> {
    let inst = instance.eliminate_equalities();
    let wl = WalkLayout::new(&inst);
    matrix_guard(wl.qubit_count())?;
    let model = model_for(&wl, beta, mode)?;
    circuit_matrix(&synth_w(&inst, &wl, &model)?)
}

/// Largest entry of `|W'W - I|`, every entry of the product included.
pub fn unitarity_residual(matrix: &WalkMatrix) -> f64 {
    let n = matrix.dimension();
    let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
    for (j, col) in matrix.columns.iter().enumerate() {
        for &(i, a) in col {
            rows[i as usize].push((j, a));
        }
    }
    (0..n)
        .into_par_iter()
        .map_init(
            || (vec![C64::new(0.0, 0.0); n], Vec::new()),
            |(acc, touched), i| {
                for &(r, a) in &matrix.columns[i] {
                    for &(j, b) in &rows[r as usize] {
                        if acc[j] == C64::new(0.0, 0.0) {
                            touched.push(j);
                        }
                        acc[j] += a.conj() * b;
                    }
                }
                let mut worst = if acc[i] == C64::new(0.0, 0.0) { 1.0 } else { 0.0f64 };
                for &j in touched.iter() {
                    let target = if j == i { 1.0 } else { 0.0 };
                    worst = worst.max((acc[j] - target).norm());
                    acc[j] = C64::new(0.0, 0.0);
                }
                touched.clear();
                worst
            },
        )
        .reduce(|| 0.0, f64::max)
}

/// `sum_x sqrt(pi(x)) |x>_S |f(x)>_F` with every other register zero.
pub fn pi_state(instance: &IlpInstance, beta: f64) -> Result<SparseState> {
    let inst = instance.eliminate_equalities();
    let wl = WalkLayout::new(&inst);
    let table = inst.gibbs_distribution(beta)?;
    let entries = table
        .entries
        .iter()
        .map(|e| {
            let f = inst.objective_value(&e.point) as i64;
            let index = wl.f.write(wl.s.write(0, e.index as i64), f);
            (index, C64::new(e.probability.sqrt(), 0.0))
        })
        .collect();
    SparseState::from_entries(&wl.layout, entries)
}

/// `|| W |Pi> - |Pi> ||`.
pub fn eigenstate_residual(instance: &IlpInstance, beta: f64, mode: AcceptanceMode) -> Result<f64> {
    let inst = instance.eliminate_equalities();
    let wl = WalkLayout::new(&inst);
    matrix_guard(wl.qubit_count())?;
    let model = model_for(&wl, beta, mode)?;
    let w = synth_w(&inst, &wl, &model)?;
    let pi = pi_state(&inst, beta)?;
    let mut image = pi.clone();
    image.apply_circuit(&w)?;
    Ok(image.distance(&pi))
}

/// `max |sqrt(pi(x) A(x,y)) - sqrt(pi(y) A(y,x))|` over feasible pairs, with
/// `A` the coin acceptance of the model.
pub fn detailed_balance_residual(instance: &IlpInstance, beta: f64, mode: AcceptanceMode) -> Result<f64> {
    let inst = instance.eliminate_equalities();
    let wl = WalkLayout::new(&inst);
    let model = model_for(&wl, beta, mode)?;
    let table = inst.gibbs_distribution(beta)?;
    let values: Vec<i128> = table
        .entries
        .iter()
        .map(|e| inst.objective_value(&e.point))
        .collect();
    let mut worst = 0.0f64;
    for (a, ea) in table.entries.iter().enumerate() {
        for (b, eb) in table.entries.iter().enumerate() {
            let forward = (ea.probability * model.acceptance(values[b] - values[a])).sqrt();
            let backward = (eb.probability * model.acceptance(values[a] - values[b])).sqrt();
            worst = worst.max((forward - backward).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub beta: f64,
    /// Dimension of the span of the feasible walk states and their images.
    pub subspace_dimension: usize,
    /// Largest norm of `W q` outside the subspace, for basis vectors `q`.
    pub leakage: f64,
    /// Eigenphases on the subspace, ascending by magnitude.
    pub phases: Vec<f64>,
    pub unit_multiplicity: usize,
    pub min_nonzero_phase: Option<f64>,
    pub classical_gap: f64,
    /// `arccos(1 - delta)`.
    pub phase_bound: f64,
    pub bound_satisfied: bool,
    /// Norm of the Gibbs state's projection onto the subspace.
    pub pi_overlap: f64,
}

fn gram_schmidt(vectors: Vec<SparseState>, tol: f64) -> Vec<SparseState> {
    let mut basis: Vec<SparseState> = Vec::new();
    for mut v in vectors {
        for _ in 0..2 {
            for q in &basis {
                let c = q.inner(&v);
                v.add_scaled(-c, q);
            }
        }
        let norm = v.norm_sqr().sqrt();
        if norm > tol {
            v.scale(C64::new(1.0 / norm, 0.0));
            basis.push(v);
        }
    }
    basis
}

/// Spectrum of the walk restricted to the span of the feasible walk states
/// `|x, f(x), 0>` and their images under the transition part of W.
pub fn eigenphase_gap_check(instance: &IlpInstance, beta: f64) -> Result<GapReport> {
    let inst = instance.eliminate_equalities();
    let wl = WalkLayout::new(&inst);
    matrix_guard(wl.qubit_count())?;
    let model = model_for(&wl, beta, AcceptanceMode::Exact)?;
    let w = synth_w(&inst, &wl, &model)?;
    let u = synth_transition(&inst, &wl, &model)?;
    let chain = inst.classical_chain(beta)?;

    let mut generators = Vec::new();
    for (&index, x) in chain.indices.iter().zip(&chain.states) {
        let f = inst.objective_value(x) as i64;
        let a = SparseState::basis(&wl.layout, wl.f.write(wl.s.write(0, index as i64), f))?;
        let mut b = a.clone();
        b.apply_circuit(&u)?;
        generators.push(a);
        generators.push(b);
    }
    let basis = gram_schmidt(generators, 1e-9);
    let dim = basis.len();

    let images = basis
        .iter()
        .map(|q| {
            let mut img = q.clone();
            img.apply_circuit(&w)?;
            Ok(img)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut restricted = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    let mut leakage = 0.0f64;
    for (j, img) in images.iter().enumerate() {
        let mut rest = img.clone();
        for (i, q) in basis.iter().enumerate() {
            let c = q.inner(img);
            restricted[(i, j)] = c;
            rest.add_scaled(-c, q);
        }
        leakage = leakage.max(rest.norm_sqr().sqrt());
    }

    let (_, t) = Schur::new(restricted).unpack();
    let mut phases: Vec<f64> = (0..dim).map(|i| t[(i, i)].arg()).collect();
    phases.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let unit_multiplicity = phases
        .iter()
        .filter(|p| p.abs() < UNIT_PHASE_TOLERANCE)
        .count();
    let min_nonzero_phase = phases
        .iter()
        .map(|p| p.abs())
        .find(|p| *p >= UNIT_PHASE_TOLERANCE);
    let phase_bound = (1.0 - chain.gap).clamp(-1.0, 1.0).acos();
    let bound_satisfied = min_nonzero_phase.is_none_or(|p| p >= phase_bound - 1e-6);

    let pi = pi_state(&inst, beta)?;
    let pi_overlap = basis
        .iter()
        .map(|q| q.inner(&pi).norm_sqr())
        .sum::<f64>()
        .sqrt();

    Ok(GapReport {
        beta,
        subspace_dimension: dim,
        leakage,
        phases,
        unit_multiplicity,
        min_nonzero_phase,
        classical_gap: chain.gap,
        phase_bound,
        bound_satisfied,
        pi_overlap,
    })
}

/// One numerical check with its threshold, if it has one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub passed: Option<bool>,
}

impl Check {
    fn bounded(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold: Some(threshold),
            passed: Some(value <= threshold),
        }
    }

    fn reported(name: &str, value: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold: None,
            passed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub beta: f64,
    pub mode: AcceptanceMode,
    pub qubits: usize,
    pub unitarity_residual: f64,
    pub eigenstate_residual: f64,
    pub detailed_balance_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Every spectral check for `instance`. Theorem-level thresholds apply to
/// Exact mode; Linear mode residuals other than unitarity are reported only.
pub fn verify(instance: &IlpInstance, beta: f64, mode: AcceptanceMode) -> Result<VerificationReport> {
    let inst = instance.eliminate_equalities();
    let wl = WalkLayout::new(&inst);
    matrix_guard(wl.qubit_count())?;
    if inst.feasible_indices()?.is_empty() {
        return Err(Error::Infeasible);
    }
    let unitarity = unitarity_residual(&build_walk_matrix(&inst, beta, mode)?);
    let eigen = eigenstate_residual(&inst, beta, mode)?;
    let balance = detailed_balance_residual(&inst, beta, mode)?;
    let mut checks = vec![Check::bounded("unitarity_residual", unitarity, 1e-10)];
    let gap = match mode {
        AcceptanceMode::Exact => {
            checks.push(Check::bounded("eigenstate_residual", eigen, 1e-9));
            checks.push(Check::bounded("detailed_balance_residual", balance, 1e-12));
            let gap = eigenphase_gap_check(&inst, beta)?;
            checks.push(Check {
                name: "unit_eigenvalue_multiplicity".into(),
                value: gap.unit_multiplicity as f64,
                threshold: Some(1.0),
                passed: Some(gap.unit_multiplicity == 1),
            });
            checks.push(Check {
                name: "eigenphase_gap".into(),
                value: gap.min_nonzero_phase.unwrap_or(std::f64::consts::PI),
                threshold: Some(gap.phase_bound - 1e-6),
                passed: Some(gap.bound_satisfied),
            });
            Some(gap)
        }
        AcceptanceMode::Linear => {
            checks.push(Check::reported("eigenstate_residual", eigen));
            checks.push(Check::reported("detailed_balance_residual", balance));
            None
        }
    };
    let passed = checks.iter().all(|c| c.passed != Some(false));
    Ok(VerificationReport {
        beta,
        mode,
        qubits: wl.qubit_count(),
        unitarity_residual: unitarity,
        eigenstate_residual: eigen,
        detailed_balance_residual: balance,
        gap,
        checks,
        passed,
    })
}
