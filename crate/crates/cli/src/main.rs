use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qmh_core::anneal::{run, Backend, RunRecord, Schedule, WalkConfig};
use qmh_core::circuit::{toffoli_equivalents, ResourceReport, WalkLayout};
use qmh_core::spectral::verify;
use qmh_core::sweep::{run_sweep, SweepConfig, SweepRow, SweepSummary};
use qmh_core::walk::{model_for, synth_w};
use qmh_core::{parse_instance, AcceptanceMode, Error, IlpInstance};

#[derive(Parser)]
#[command(name = "qmh", version, about = "Quantum Metropolis-Hastings walks for integer linear programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the annealed walk and write run.json and marginal.csv
    Solve(SolveArgs),
    /// Qubit and Toffoli-equivalent counts of one walk step
    Estimate(EstimateArgs),
    /// Resource scaling over random instances
    Sweep(SweepArgs),
    /// Spectral checks of the walk operator
    Verify(VerifyArgs),
    /// Brute-force Gibbs table, optimum and classical gap
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Linear,
}

impl From<Mode> for AcceptanceMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => AcceptanceMode::Exact,
            Mode::Linear => AcceptanceMode::Linear,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Sparse,
    Dense,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Number of annealing stages
    #[arg(long = "q", default_value_t = 20)]
    stages: usize,
    /// Largest number of walk steps per stage
    #[arg(long = "t-max", default_value_t = 3)]
    t_max: usize,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    #[arg(long, env = "QMH_SEED", default_value_t = 0)]
    seed: u64,
    /// Stages of the linear ramp to beta = 1
    #[arg(long, default_value_t = 10)]
    linear_stages: usize,
    /// Growth factor of beta after the ramp
    #[arg(long, default_value_t = 1.5)]
    ratio: f64,
    /// Explicit comma-separated schedule; overrides --q and the ramp
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Override the bits per variable of the instance file
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, value_enum, default_value = "sparse")]
    backend: BackendArg,
    /// Keep the S marginal after every stage in run.json
    #[arg(long)]
    record_marginals: bool,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, value_enum, default_value = "linear")]
    mode: Mode,
    /// Write the gate list of W to this file
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Variable counts, e.g. 3 or 2,3,4 or 2..4
    #[arg(long, default_value = "3")]
    vars: String,
    /// Bits per variable
    #[arg(long, default_value = "2..8")]
    bits_range: String,
    /// Constraint counts
    #[arg(long, alias = "constraints", default_value = "1..4")]
    constraints_range: String,
    /// Instances per configuration
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 4)]
    coeff_bound: i64,
    #[arg(long, env = "QMH_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, value_enum, default_value = "linear")]
    mode: Mode,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Instance(_) => 2,
            Error::Infeasible => 3,
            Error::Guard(_) => 4,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn load(path: &Path) -> Result<IlpInstance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    parse_instance(&text).map_err(|e| Failure::from(Error::from(e)))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
}

/// Write to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(value: &impl Serialize) {
    emit(&(serde_json::to_string_pretty(value).expect("serializable") + "\n"));
}

/// Parse `3`, `2,3,4` or the inclusive range `2..4`.
fn parse_list<T: TryFrom<u64>>(text: &str) -> Result<Vec<T>, Failure> {
    let bad = || Failure {
        code: 1,
        message: format!("cannot parse `{text}` as a value, list or range"),
    };
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).map(|v| T::try_from(v).map_err(|_| bad())).collect()
    } else {
        text.split(',')
            .map(|s| {
                let v: u64 = s.trim().parse().map_err(|_| bad())?;
                T::try_from(v).map_err(|_| bad())
            })
            .collect()
    }
}

#[derive(Serialize)]
struct RunOutput<'a> {
    instance: &'a IlpInstance,
    #[serde(flatten)]
    record: &'a RunRecord,
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let mut instance = load(&args.instance)?;
    if let Some(bits) = args.bits {
        instance = instance.with_bits(bits).map_err(|e| Failure::from(Error::from(e)))?;
    }
    let mut config = WalkConfig {
        stages: args.stages,
        max_repetitions: args.t_max,
        schedule: Schedule::LinearThenGeometric {
            linear_stages: args.linear_stages,
            ratio: args.ratio,
        },
        mode: args.mode.into(),
        seed: args.seed,
        record_marginals: args.record_marginals,
        backend: match args.backend {
            BackendArg::Sparse => Backend::Sparse,
            BackendArg::Dense => Backend::Dense,
        },
    };
    if let Some(betas) = args.betas {
        config = config.with_schedule(betas);
    }
    let record = run(&instance, &config)?;

    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    write_json(
        &args.out.join("run.json"),
        &RunOutput {
            instance: &instance,
            record: &record,
        },
    )?;
    let csv_path = args.out.join("marginal.csv");
    write_marginal(&csv_path, &instance, &record).map_err(|e| io_failure(&csv_path, e))?;

    let mut text = format!(
        "{} stages, {} qubits, feasible mass {:.4}, mode {:?} with probability {:.4}\n",
        record.stages.len(),
        record.qubits,
        record.feasible_mass,
        record.mode_point,
        record.mode_probability
    );
    for e in sorted_marginal(&record).iter().take(12) {
        if e.probability < 1e-4 {
            break;
        }
        let bar = "#".repeat((e.probability * 50.0).round() as usize);
        let _ = writeln!(
            text,
            "{:>16} {:>7.4} {}{}",
            format!("{:?}", e.point),
            e.probability,
            bar,
            if e.feasible { "" } else { " (infeasible)" }
        );
    }
    let _ = writeln!(text, "wall time {:.2}s", record.wall_time_s);
    emit(&text);
    Ok(())
}

fn sorted_marginal(record: &RunRecord) -> Vec<&qmh_core::sim::MarginalEntry> {
    let mut entries: Vec<_> = record.final_marginal.iter().collect();
    entries.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    entries
}

fn write_marginal(path: &Path, instance: &IlpInstance, record: &RunRecord) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=instance.variables()).map(|i| format!("x{i}")).collect();
    header.extend(["probability", "feasible", "f_value"].map(String::from));
    w.write_record(&header)?;
    for e in sorted_marginal(record) {
        let mut row: Vec<String> = e.point.iter().map(|x| x.to_string()).collect();
        row.push(format!("{:.12e}", e.probability));
        row.push(e.feasible.to_string());
        row.push(e.f_value.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput {
    mode: AcceptanceMode,
    beta: f64,
    equalities_split: usize,
    qubits: usize,
    registers: std::collections::BTreeMap<String, usize>,
    toffoli_equivalents: f64,
    breakdown: std::collections::BTreeMap<String, f64>,
    report: ResourceReport,
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    let original = load(&args.instance)?;
    let instance = original.eliminate_equalities();
    let wl = WalkLayout::new(&instance);
    let model = model_for(&wl, args.beta, args.mode.into())?;
    let w = synth_w(&instance, &wl, &model)?;
    let report = toffoli_equivalents(&w);
    if let Some(path) = &args.dump {
        fs::write(path, w.dump()).map_err(|e| io_failure(path, e))?;
    }
    print_json(&EstimateOutput {
        mode: args.mode.into(),
        beta: args.beta,
        equalities_split: original.equality_count(),
        qubits: wl.qubit_count(),
        registers: wl.widths(),
        toffoli_equivalents: report.toffoli_equivalents,
        breakdown: report.breakdown.clone(),
        report,
    });
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let config = SweepConfig {
        variables: parse_list(&args.vars)?,
        bits: parse_list(&args.bits_range)?,
        constraints: parse_list(&args.constraints_range)?,
        instances: args.instances,
        coeff_bound: args.coeff_bound,
        seed: args.seed,
        beta: args.beta,
        mode: args.mode.into(),
    };
    let (rows, summary) = run_sweep(&config)?;
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    let rows_path = args.out.join("sweep.csv");
    write_rows(&rows_path, &rows).map_err(|e| io_failure(&rows_path, e))?;
    let summary_path = args.out.join("sweep_summary.csv");
    write_summary(&summary_path, &summary).map_err(|e| io_failure(&summary_path, e))?;
    write_json(&args.out.join("sweep_summary.json"), &summary)?;

    let mut text = format!(
        "{} instances, {} all-zero forms redrawn\n",
        rows.len(),
        summary.rejected_zero_forms
    );
    for g in &summary.groups {
        let _ = writeln!(
            text,
            "n={} m'={}: toffoli = {:.3} k + {:.3}, R^2 = {:.4} ({} rows)",
            g.n, g.m_prime, g.fit.slope, g.fit.intercept, g.fit.r_squared, g.fit.count
        );
    }
    let q = &summary.qubit_fit;
    let _ = writeln!(
        text,
        "qubits = {:.3} n*d + {:.3}, R^2 = {:.4}",
        q.slope, q.intercept, q.r_squared
    );
    emit(&text);
    Ok(())
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "d", "m_prime", "coeff_bound", "k", "toffoli_equivalents", "seed"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.d.to_string(),
            r.m_prime.to_string(),
            r.coeff_bound.to_string(),
            r.k.to_string(),
            r.toffoli.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary(path: &Path, summary: &SweepSummary) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fit", "n", "m_prime", "count", "slope", "intercept", "r_squared"])?;
    for g in &summary.groups {
        w.write_record([
            "toffoli_vs_k".to_string(),
            g.n.to_string(),
            g.m_prime.to_string(),
            g.fit.count.to_string(),
            g.fit.slope.to_string(),
            g.fit.intercept.to_string(),
            g.fit.r_squared.to_string(),
        ])?;
    }
    let q = &summary.qubit_fit;
    w.write_record([
        "k_vs_nd".to_string(),
        String::new(),
        String::new(),
        q.count.to_string(),
        q.slope.to_string(),
        q.intercept.to_string(),
        q.r_squared.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn verify_cmd(args: VerifyArgs) -> Result<(), Failure> {
    let instance = load(&args.instance)?;
    let report = verify(&instance, args.beta, args.mode.into())?;
    print_json(&report);
    if report.passed {
        Ok(())
    } else {
        Err(Failure {
            code: 5,
            message: "verification check failed".into(),
        })
    }
}

#[derive(Serialize)]
struct GibbsRow {
    point: Vec<i64>,
    probability: f64,
    f_value: i128,
}

#[derive(Serialize)]
struct OracleOutput {
    beta: f64,
    equalities_split: usize,
    search_space: u64,
    feasible_count: usize,
    argmin: Vec<Vec<i64>>,
    optimum: i128,
    classical_gap: Option<f64>,
    gibbs: Vec<GibbsRow>,
}

fn oracle(args: OracleArgs) -> Result<(), Failure> {
    let original = load(&args.instance)?;
    let instance = original.eliminate_equalities();
    let table = instance.gibbs_distribution(args.beta)?;
    let (argmin, optimum) = instance.brute_force_optimum()?;
    let classical_gap = match instance.classical_chain(args.beta) {
        Ok(chain) => Some(chain.gap),
        Err(Error::Guard(_)) => None,
        Err(e) => return Err(e.into()),
    };
    print_json(&OracleOutput {
        beta: args.beta,
        equalities_split: original.equality_count(),
        search_space: 1u64 << instance.encoding_bits(),
        feasible_count: table.entries.len(),
        argmin,
        optimum,
        classical_gap,
        gibbs: table
            .entries
            .iter()
            .map(|e| GibbsRow {
                f_value: instance.objective_value(&e.point),
                point: e.point.clone(),
                probability: e.probability,
            })
            .collect(),
    });
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Estimate(a) => estimate(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
