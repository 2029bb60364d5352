//! Random instance generation and resource scaling sweeps.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{toffoli_equivalents, WalkLayout};
use crate::error::{Error, Result};
use crate::ilp::{Constraint, IlpInstance, LinearForm};
use crate::walk::{model_for, synth_w, AcceptanceMode};

/// Independent 64-bit seed for item `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_form<R: Rng + ?Sized>(n: usize, bound: i64, rng: &mut R, rejected: &mut usize) -> LinearForm {
    loop {
        let coefficients: Vec<i64> = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        let constant = rng.gen_range(-bound..=bound);
        if coefficients.iter().any(|&c| c != 0) {
            return LinearForm::new(constant, coefficients);
        }
        *rejected += 1;
    }
}

/// Instance with `m` inequality constraints, every coefficient and constant
/// uniform in `[-bound, bound]`. Forms whose coefficients all vanish are
/// redrawn; the number of redraws is returned alongside.
pub fn random_instance<R: Rng + ?Sized>(
    n: usize,
    d: u32,
    m: usize,
    bound: i64,
    rng: &mut R,
) -> Result<(IlpInstance, usize)> {
    if bound < 1 {
        return Err(Error::Config(format!("coefficient bound must be positive, got {bound}")));
    }
    let mut rejected = 0;
    let objective = random_form(n, bound, rng, &mut rejected);
    let constraints = (0..m)
        .map(|_| Constraint::ge(random_form(n, bound, rng, &mut rejected)))
        .collect();
    Ok((IlpInstance::new(n, d, objective, constraints)?, rejected))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub count: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if sxx > 0.0 && syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        0.0
    };
    LinearFit {
        count: xs.len(),
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub variables: Vec<usize>,
    pub bits: Vec<u32>,
    pub constraints: Vec<usize>,
    pub instances: usize,
    pub coeff_bound: i64,
    pub seed: u64,
    pub beta: f64,
    pub mode: AcceptanceMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            variables: vec![3],
            bits: (2..=8).collect(),
            constraints: vec![1, 2, 3, 4],
            instances: 100,
            coeff_bound: 4,
            seed: 0,
            beta: 1.0,
            mode: AcceptanceMode::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub d: u32,
    pub m_prime: usize,
    pub coeff_bound: i64,
    pub k: usize,
    pub toffoli: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFit {
    pub n: usize,
    pub m_prime: usize,
    /// Toffoli equivalents against total qubits.
    pub fit: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub groups: Vec<GroupFit>,
    /// Total qubits against `n * d` over every row.
    pub qubit_fit: LinearFit,
    /// All-zero forms redrawn while generating instances.
    pub rejected_zero_forms: usize,
}

/// Synthesize one walk step for random instances of every configuration
/// and fit the scaling trends. Instances run in parallel, each on its own
/// derived seed, so the result does not depend on scheduling.
pub fn run_sweep(config: &SweepConfig) -> Result<(Vec<SweepRow>, SweepSummary)> {
    if config.variables.is_empty() || config.bits.is_empty() || config.constraints.is_empty() {
        return Err(Error::Config("sweep ranges must be nonempty".into()));
    }
    let mut tasks = Vec::new();
    for &n in &config.variables {
        for &d in &config.bits {
            for &m in &config.constraints {
                for _ in 0..config.instances {
                    tasks.push((n, d, m));
                }
            }
        }
    }
    let results = tasks
        .par_iter()
        .enumerate()
        .map(|(i, &(n, d, m))| {
            let seed = derive_seed(config.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (inst, rejected) = random_instance(n, d, m, config.coeff_bound, &mut rng)?;
            let wl = WalkLayout::new(&inst);
            let model = model_for(&wl, config.beta, config.mode)?;
            let report = toffoli_equivalents(&synth_w(&inst, &wl, &model)?);
            Ok((
                SweepRow {
                    n,
                    d,
                    m_prime: m,
                    coeff_bound: config.coeff_bound,
                    k: wl.qubit_count(),
                    toffoli: report.toffoli_equivalents,
                    seed,
                },
                rejected,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let rejected_zero_forms = results.iter().map(|r| r.1).sum();
    let rows: Vec<SweepRow> = results.into_iter().map(|r| r.0).collect();
    let summary = summarize(&rows, rejected_zero_forms);
    Ok((rows, summary))
}

/// Per-(n, m') regressions of cost on qubits and one of qubits on `n * d`.
pub fn summarize(rows: &[SweepRow], rejected_zero_forms: usize) -> SweepSummary {
    let mut grouped: BTreeMap<(usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let g = grouped.entry((r.n, r.m_prime)).or_default();
        g.0.push(r.k as f64);
        g.1.push(r.toffoli);
    }
    let groups = grouped
        .into_iter()
        .map(|((n, m_prime), (xs, ys))| GroupFit {
            n,
            m_prime,
            fit: linear_fit(&xs, &ys),
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| (r.n * r.d as usize) as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    SweepSummary {
        groups,
        qubit_fit: linear_fit(&xs, &ys),
        rejected_zero_forms,
    }
}
