//! The randomized annealing loop: for each inverse temperature apply the walk
//! a random number of times, then measure and reset the walk registers.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuit::WalkLayout;
use crate::error::{Error, Result};
use crate::ilp::IlpInstance;
use crate::sim::{ancilla_residual, marginal, DenseState, MarginalEntry, QuantumState, SparseState};
use crate::walk::{model_for, synth_initial, synth_w, AcceptanceMode};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Schedule {
    /// `beta_k = k / linear_stages` up to 1, then multiplied by `ratio` each
    /// stage.
    LinearThenGeometric { linear_stages: usize, ratio: f64 },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkConfig {
    /// Number of annealing stages.
    pub stages: usize,
    /// Largest number of walk steps per stage.
    pub max_repetitions: usize,
    pub schedule: Schedule,
    pub mode: AcceptanceMode,
    pub seed: u64,
    pub record_marginals: bool,
    pub backend: Backend,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            stages: 20,
            max_repetitions: 3,
            schedule: Schedule::LinearThenGeometric {
                linear_stages: 10,
                ratio: 1.5,
            },
            mode: AcceptanceMode::Exact,
            seed: 0,
            record_marginals: false,
            backend: Backend::Sparse,
        }
    }
}

impl WalkConfig {
    /// Config following an explicit schedule, one stage per entry.
    pub fn with_schedule(mut self, betas: Vec<f64>) -> Self {
        self.stages = betas.len();
        self.schedule = Schedule::Explicit(betas);
        self
    }
}

/// The inverse temperature of every stage.
pub fn make_schedule(config: &WalkConfig) -> Result<Vec<f64>> {
    if config.stages == 0 {
        return Err(Error::Config("at least one stage is required".into()));
    }
    if config.max_repetitions == 0 {
        return Err(Error::Config("at least one repetition per stage is required".into()));
    }
    let betas = match &config.schedule {
        Schedule::LinearThenGeometric {
            linear_stages,
            ratio,
        } => {
            if *linear_stages == 0 || !(ratio.is_finite() && *ratio >= 1.0) {
                return Err(Error::Config(format!(
                    "linear stages must be positive and ratio at least 1 (got {linear_stages}, {ratio})"
                )));
            }
            let mut betas = Vec::with_capacity(config.stages);
            for k in 1..=config.stages {
                let b = if k <= *linear_stages {
                    k as f64 / *linear_stages as f64
                } else {
                    betas[k - 2] * ratio
                };
                betas.push(b);
            }
            betas
        }
        Schedule::Explicit(list) => {
            if list.len() != config.stages {
                return Err(Error::Config(format!(
                    "explicit schedule has {} entries for {} stages",
                    list.len(),
                    config.stages
                )));
            }
            list.clone()
        }
    };
    if betas.iter().any(|b| !b.is_finite()) || betas[0] < 0.0 {
        return Err(Error::Config("inverse temperatures must be finite and nonnegative".into()));
    }
    if let Some(w) = betas.windows(2).find(|w| w[1] < w[0]) {
        return Err(Error::Config(format!(
            "schedule decreases from {} to {}",
            w[0], w[1]
        )));
    }
    Ok(betas)
}

/// Register values observed at the end of a stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    pub coin: u64,
    pub s_prime: u64,
    pub f_prime: u64,
    pub counter: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub beta: f64,
    pub repetitions: usize,
    pub outcome: StageOutcome,
    /// Probability of the S register, in bit-pattern order, after the
    /// measurement of this stage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub config: WalkConfig,
    /// Equality constraints replaced by inequality pairs before synthesis.
    pub equalities_split: usize,
    pub qubits: usize,
    pub schedule: Vec<f64>,
    pub stages: Vec<StageRecord>,
    pub final_marginal: Vec<MarginalEntry>,
    pub mode_point: Vec<i64>,
    pub mode_probability: f64,
    pub feasible_mass: f64,
    pub initial_feasible_mass: f64,
    /// Mass with F' or R nonzero just before the final measurement.
    pub ancilla_residual: f64,
    pub wall_time_s: f64,
}

/// Run the annealing loop on `instance`.
pub fn run(instance: &IlpInstance, config: &WalkConfig) -> Result<RunRecord> {
    let schedule = make_schedule(config)?;
    let inst = instance.eliminate_equalities();
    if inst.feasible_indices()?.is_empty() {
        return Err(Error::Infeasible);
    }
    let wl = WalkLayout::new(&inst);
    match config.backend {
        Backend::Sparse => run_on(SparseState::zero(&wl.layout)?, instance, &inst, &wl, config, schedule),
        Backend::Dense => run_on(DenseState::zero(&wl.layout)?, instance, &inst, &wl, config, schedule),
    }
}

fn run_on<S: QuantumState>(
    mut state: S,
    original: &IlpInstance,
    inst: &IlpInstance,
    wl: &WalkLayout,
    config: &WalkConfig,
    schedule: Vec<f64>,
) -> Result<RunRecord> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    state.apply_circuit(&synth_initial(inst, wl)?)?;
    let feasible_mass =
        |m: &[MarginalEntry]| m.iter().filter(|e| e.feasible).map(|e| e.probability).sum::<f64>();
    let initial_feasible_mass = feasible_mass(&marginal(&state, inst, wl)?);

    let measured = [&wl.c, &wl.s_prime, &wl.f_prime, &wl.r];
    let mut stages = Vec::with_capacity(schedule.len());
    let mut residual = 0.0;
    for (k, &beta) in schedule.iter().enumerate() {
        let model = model_for(wl, beta, config.mode)?;
        let w = synth_w(inst, wl, &model)?;
        let repetitions = rng.gen_range(1..=config.max_repetitions);
        for _ in 0..repetitions {
            state.apply_circuit(&w)?;
        }
        residual = ancilla_residual(&state, wl);
        let values = state.measure_partial(&measured, &mut rng)?;
        let snapshot = if config.record_marginals {
            Some(state.register_distribution(&wl.s)?)
        } else {
            None
        };
        stages.push(StageRecord {
            stage: k + 1,
            beta,
            repetitions,
            outcome: StageOutcome {
                coin: values[0],
                s_prime: values[1],
                f_prime: values[2],
                counter: values[3],
            },
            marginal: snapshot,
        });
    }

    let final_marginal = marginal(&state, inst, wl)?;
    let mode = final_marginal
        .iter()
        .fold(None::<&MarginalEntry>, |best, e| match best {
            Some(b) if b.probability >= e.probability => Some(b),
            _ => Some(e),
        })
        .expect("nonempty marginal");
    Ok(RunRecord {
        config: config.clone(),
        equalities_split: original.equality_count(),
        qubits: wl.qubit_count(),
        mode_point: mode.point.clone(),
        mode_probability: mode.probability,
        feasible_mass: feasible_mass(&final_marginal),
        initial_feasible_mass,
        ancilla_residual: residual,
        schedule,
        stages,
        final_marginal,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Probability of the brute-force minimizers after each stage.
pub fn success_probability_trace(record: &RunRecord, instance: &IlpInstance) -> Result<Vec<(usize, f64)>> {
    let inst = instance.eliminate_equalities();
    let (optima, _) = inst.brute_force_optimum()?;
    let indices: Vec<usize> = optima.iter().map(|x| inst.encode_point(x) as usize).collect();
    record
        .stages
        .iter()
        .map(|s| {
            let m = s.marginal.as_ref().ok_or(Error::MarginalsNotRecorded)?;
            Ok((s.stage, indices.iter().map(|&i| m[i]).sum()))
        })
        .collect()
}

/// Probability of infeasible points after each stage.
pub fn infeasible_mass_trace(record: &RunRecord, instance: &IlpInstance) -> Result<Vec<(usize, f64)>> {
    let inst = instance.eliminate_equalities();
    let feasible = inst.feasible_indices()?;
    record
        .stages
        .iter()
        .map(|s| {
            let m = s.marginal.as_ref().ok_or(Error::MarginalsNotRecorded)?;
            let inside: f64 = feasible.iter().map(|&i| m[i as usize]).sum();
            Ok((s.stage, (m.iter().sum::<f64>() - inside).max(0.0)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let c = WalkConfig {
            stages: 4,
            schedule: Schedule::LinearThenGeometric {
                linear_stages: 2,
                ratio: 2.0,
            },
            ..WalkConfig::default()
        };
        assert_eq!(make_schedule(&c).unwrap(), vec![0.5, 1.0, 2.0, 4.0]);
    }

    #[test]
    fn explicit_lists() {
        let c = WalkConfig::default().with_schedule(vec![0.0, 1.0, 5.0]);
        assert_eq!(make_schedule(&c).unwrap(), vec![0.0, 1.0, 5.0]);
        let bad = WalkConfig::default().with_schedule(vec![1.0, 0.5]);
        assert!(make_schedule(&bad).is_err());
        let empty = WalkConfig::default().with_schedule(vec![]);
        assert!(make_schedule(&empty).is_err());
    }
}
