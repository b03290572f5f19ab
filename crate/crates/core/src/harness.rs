//! Experiment harness: seeded sweeps over problems, noise levels, stepsize
//! scales and solver variants, best-iterate reporting, convergence-rate
//! checks and CSV/JSONL emission.
//!
//! Every run draws its gradient noise from a stream derived by hashing the
//! full plan coordinates, so results are independent of execution order and
//! of the degree of parallelism. With the `parallel` feature (default) the
//! sweep fans out over rayon; `sweep_sequential` is always available and
//! produces identical records.

use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::find_problem;
use crate::driver::{run_with, RunHooks, SolverConfig, StepLaw};
use crate::error::SolverError;
use crate::problem::{GradientOracle, NoiseSpec, ProblemInstance};
use crate::record::{early_stop, IterationLog, RunRecord};
use crate::subproblem::TangentialMode;

/// Solver variants the harness can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    ItsqpExact,
    ItsqpIterative,
    /// Single-stepsize comparator using the same step decomposition. It
    /// omits the adaptive merit-parameter stepsize of the method it stands
    /// in for, hence the "-style" label in output.
    SsqpBaseline,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::ItsqpExact => "itsqp-exact",
            Variant::ItsqpIterative => "itsqp-iterative",
            Variant::SsqpBaseline => "ssqp-style",
        }
    }

    pub fn parse_cli(s: &str) -> Option<Self> {
        match s {
            "itsqp-exact" => Some(Variant::ItsqpExact),
            "itsqp-iterative" => Some(Variant::ItsqpIterative),
            "ssqp" | "ssqp-style" => Some(Variant::SsqpBaseline),
            _ => None,
        }
    }

    fn step_law(self) -> StepLaw {
        match self {
            Variant::SsqpBaseline => StepLaw::SingleStepsize,
            _ => StepLaw::TwoStepsize,
        }
    }

    fn tangential_mode(self) -> TangentialMode {
        match self {
            Variant::ItsqpIterative => TangentialMode::Iterative,
            _ => TangentialMode::Exact,
        }
    }
}

/// A full sweep specification. Defaults: four noise levels, five stepsize
/// scales, fifteen seeds and a budget of 10,000 iterations.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub problems: Vec<String>,
    pub noise_levels: Vec<f64>,
    pub beta_scales: Vec<f64>,
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub variants: Vec<Variant>,
    /// Shared algorithm parameters (eta and budget are overridden per cell).
    pub base: SolverConfig,
    pub log_every: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            problems: vec!["P1".into(), "P2".into(), "P3".into()],
            noise_levels: vec![1e-4, 1e-3, 1e-2, 1e-1],
            beta_scales: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            seeds: (1..=15).collect(),
            budget: 10_000,
            variants: vec![Variant::ItsqpExact],
            base: SolverConfig::default(),
            log_every: 1,
        }
    }
}

/// One cell of the plan in canonical order.
#[derive(Debug, Clone)]
pub struct PlanCell {
    pub problem: String,
    pub noise: f64,
    pub eta: f64,
    pub seed: u64,
    pub variant: Variant,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.problems.is_empty()
            || self.noise_levels.is_empty()
            || self.beta_scales.is_empty()
            || self.seeds.is_empty()
            || self.variants.is_empty()
        {
            return Err(SolverError::InvalidConfig(
                "experiment plan has an empty axis".into(),
            ));
        }
        for name in &self.problems {
            if find_problem(name).is_none() {
                return Err(SolverError::InvalidConfig(format!(
                    "unknown problem {name}"
                )));
            }
        }
        Ok(())
    }

    pub fn total_runs(&self) -> usize {
        self.problems.len()
            * self.noise_levels.len()
            * self.beta_scales.len()
            * self.seeds.len()
            * self.variants.len()
    }

    /// Cells in the deterministic nested order problem > noise > eta > seed
    /// > variant.
    pub fn cells(&self) -> Vec<PlanCell> {
        let mut out = Vec::with_capacity(self.total_runs());
        for problem in &self.problems {
            for &noise in &self.noise_levels {
                for &eta in &self.beta_scales {
                    for &seed in &self.seeds {
                        for &variant in &self.variants {
                            out.push(PlanCell {
                                problem: problem.clone(),
                                noise,
                                eta,
                                seed,
                                variant,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Derives the per-run noise stream from the full plan coordinates, so runs
/// are reproducible independently of scheduling.
pub fn derive_stream_seed(seed: u64, problem: &str, noise: f64, eta: f64, variant: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(problem.as_bytes());
    hasher.update(noise.to_le_bytes());
    hasher.update(eta.to_le_bytes());
    hasher.update(variant.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

/// Executes one plan cell: builds the per-cell config and oracle, installs
/// the success test as the stop hook, and runs the solver.
pub fn run_cell(plan: &ExperimentPlan, cell: &PlanCell) -> Result<RunRecord, SolverError> {
    let problem = find_problem(&cell.problem)
        .ok_or_else(|| SolverError::InvalidConfig(format!("unknown problem {}", cell.problem)))?;
    let config = SolverConfig {
        eta: cell.eta,
        iterations: plan.budget,
        tangential_mode: cell.variant.tangential_mode(),
        ..plan.base.clone()
    };
    let stream = derive_stream_seed(
        cell.seed,
        &cell.problem,
        cell.noise,
        cell.eta,
        cell.variant.label(),
    );
    let mut oracle = GradientOracle::new(problem.clone(), NoiseSpec::new(cell.noise, stream));
    let mut stop = early_stop;
    let hooks = RunHooks {
        stop: Some(&mut stop),
        observer: None,
        log_every: plan.log_every,
    };
    let mut record = run_with(
        &problem,
        &mut oracle,
        &config,
        cell.variant.step_law(),
        hooks,
    );
    // The derived stream seeds the oracle; report the plan seed instead.
    record.seed = cell.seed;
    Ok(record)
}

/// Runs one problem once, outside any plan, with the success test installed.
pub fn run_one(
    problem: &Arc<ProblemInstance>,
    config: &SolverConfig,
    noise: f64,
    seed: u64,
    variant: Variant,
) -> RunRecord {
    run_one_logged(problem, config, noise, seed, variant, 1)
}

/// [`run_one`] with trajectory thinning; the best-iterate summary is always
/// computed from the stored (thinned) trajectory so it stays recomputable.
pub fn run_one_logged(
    problem: &Arc<ProblemInstance>,
    config: &SolverConfig,
    noise: f64,
    seed: u64,
    variant: Variant,
    log_every: usize,
) -> RunRecord {
    let stream = derive_stream_seed(seed, &problem.name, noise, config.eta, variant.label());
    let mut oracle = GradientOracle::new(problem.clone(), NoiseSpec::new(noise, stream));
    let config = SolverConfig {
        tangential_mode: variant.tangential_mode(),
        ..config.clone()
    };
    let mut stop = early_stop;
    let hooks = RunHooks {
        stop: Some(&mut stop),
        observer: None,
        log_every,
    };
    let mut record = run_with(problem, &mut oracle, &config, variant.step_law(), hooks);
    record.seed = seed;
    record
}

/// Runs the single-stepsize baseline on one problem.
pub fn ssqp_baseline_run(
    problem: &Arc<ProblemInstance>,
    config: &SolverConfig,
    noise: f64,
    seed: u64,
) -> RunRecord {
    run_one(problem, config, noise, seed, Variant::SsqpBaseline)
}

/// Runs every cell of the plan sequentially, in plan order.
pub fn sweep_sequential(plan: &ExperimentPlan) -> Result<Vec<RunRecord>, SolverError> {
    plan.validate()?;
    plan.cells()
        .iter()
        .map(|cell| run_cell(plan, cell))
        .collect()
}

/// Runs every cell of the plan, in parallel when the `parallel` feature is
/// enabled. Record order always matches plan order.
pub fn sweep(plan: &ExperimentPlan) -> Result<Vec<RunRecord>, SolverError> {
    plan.validate()?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        plan.cells()
            .par_iter()
            .map(|cell| run_cell(plan, cell))
            .collect::<Result<Vec<_>, _>>()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sweep_sequential(plan)
    }
}

/// Memory-light sweep: maps each finished run straight to its summary row.
pub fn sweep_rows(plan: &ExperimentPlan) -> Result<Vec<SummaryRow>, SolverError> {
    plan.validate()?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        plan.cells()
            .par_iter()
            .map(|cell| run_cell(plan, cell).map(|r| SummaryRow::from_record(&r)))
            .collect::<Result<Vec<_>, _>>()
    }
    #[cfg(not(feature = "parallel"))]
    {
        plan.cells()
            .iter()
            .map(|cell| run_cell(plan, cell).map(|r| SummaryRow::from_record(&r)))
            .collect()
    }
}

/// Measures a rate check can track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMeasure {
    /// `||J^T c||^2` — the infeasibility-stationarity measure.
    JtcSq,
    /// `||c||` — the constraint violation.
    CNorm,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub budget: usize,
    /// Seed-averaged running mean of the measure over the budget.
    pub mean_running_avg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Ratios between consecutive budgets (empty for a single budget).
    pub ratios: Vec<f64>,
}

/// For each budget `K`, runs fresh experiments with `beta = eta / sqrt(K)`
/// across the seeds and averages the running mean of the chosen measure over
/// the `K` iterations. No early stopping: the rate target is about the whole
/// trajectory.
#[allow(clippy::too_many_arguments)]
pub fn rate_check(
    problem_name: &str,
    base: &SolverConfig,
    noise: f64,
    eta: f64,
    seeds: &[u64],
    variant: Variant,
    measure: RateMeasure,
    budgets: &[usize],
) -> Result<RateTable, SolverError> {
    let problem = find_problem(problem_name)
        .ok_or_else(|| SolverError::InvalidConfig(format!("unknown problem {problem_name}")))?;
    if seeds.is_empty() || budgets.is_empty() {
        return Err(SolverError::InvalidConfig(
            "rate check needs seeds and budgets".into(),
        ));
    }
    let run_budget = |budget: usize, seed: u64| -> Result<f64, SolverError> {
        let config = SolverConfig {
            eta,
            iterations: budget,
            tangential_mode: variant.tangential_mode(),
            ..base.clone()
        };
        let stream = derive_stream_seed(seed, problem_name, noise, eta, variant.label());
        let mut oracle = GradientOracle::new(problem.clone(), NoiseSpec::new(noise, stream));
        let record = run_with(
            &problem,
            &mut oracle,
            &config,
            variant.step_law(),
            RunHooks::default(),
        );
        if let crate::record::RunStatus::Failed(msg) = &record.status {
            return Err(SolverError::NumericFailure(format!(
                "rate-check run failed: {msg}"
            )));
        }
        let sum: f64 = record
            .logs
            .iter()
            .map(|l| match measure {
                RateMeasure::JtcSq => l.jtc_norm * l.jtc_norm,
                RateMeasure::CNorm => l.c_norm,
            })
            .sum();
        Ok(sum / budget as f64)
    };

    let mut rows = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let per_seed: Result<Vec<f64>, SolverError> =
            seeds.iter().map(|&s| run_budget(budget, s)).collect();
        let per_seed = per_seed?;
        let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        rows.push(RateRow {
            budget,
            mean_running_avg: mean,
        });
    }
    let ratios = rows
        .windows(2)
        .map(|w| w[1].mean_running_avg / w[0].mean_running_avg)
        .collect();
    Ok(RateTable { rows, ratios })
}

/// Fixed summary schema: one row per run.
pub const SUMMARY_HEADER: &str =
    "problem,noise,eta,seed,variant,K_used,best_k,best_c_inf,best_kkt_inf,final_jtc,wall_ms";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub noise: f64,
    pub eta: f64,
    pub seed: u64,
    pub variant: String,
    pub k_used: usize,
    pub best_k: usize,
    pub best_c_inf: f64,
    pub best_kkt_inf: f64,
    pub final_jtc: f64,
    pub wall_ms: u128,
    /// Whether the run aborted; kept out of the serialized schema.
    #[serde(skip)]
    pub failed: bool,
}

impl SummaryRow {
    pub fn from_record(record: &RunRecord) -> Self {
        let (best_k, best_c_inf, best_kkt_inf) = match &record.best {
            Some(b) => (b.k_best, b.c_inf, b.kkt_inf),
            None => (0, f64::NAN, f64::NAN),
        };
        Self {
            failed: record.failed(),
            problem: record.problem.clone(),
            noise: record.noise,
            eta: record.eta,
            seed: record.seed,
            variant: record.variant.clone(),
            k_used: record.iterations_run,
            best_k,
            best_c_inf,
            best_kkt_inf,
            final_jtc: record.final_jtc,
            wall_ms: record.wall_time.as_millis(),
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.problem,
            fmt_float(self.noise),
            fmt_float(self.eta),
            self.seed,
            self.variant,
            self.k_used,
            self.best_k,
            fmt_float(self.best_c_inf),
            fmt_float(self.best_kkt_inf),
            fmt_float(self.final_jtc),
            self.wall_ms
        )
    }
}

/// Renders a float with 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// Writes the summary CSV (fixed header, one row per record).
pub fn emit_summary<W: Write + ?Sized>(rows: &[SummaryRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    Ok(())
}

/// Writes one JSON object per iteration log.
pub fn emit_trajectory_jsonl<W: Write + ?Sized>(
    logs: &[IterationLog],
    out: &mut W,
) -> io::Result<()> {
    for log in logs {
        serde_json::to_writer(&mut *out, log)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Writes one JSON object per summary row.
pub fn emit_rows_jsonl<W: Write + ?Sized>(rows: &[SummaryRow], out: &mut W) -> io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut *out, row)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Per-(problem, variant) arithmetic means of the best-iterate metrics over
/// all runs, for quick comparison tables. Arithmetic aggregation is a
/// documented choice.
pub fn compare_table(rows: &[SummaryRow]) -> String {
    let mut keys: Vec<(String, String)> = Vec::new();
    for row in rows {
        let key = (row.problem.clone(), row.variant.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = String::from("problem variant mean_best_c_inf mean_best_kkt_inf runs\n");
    for (problem, variant) in keys {
        let group: Vec<&SummaryRow> = rows
            .iter()
            .filter(|r| r.problem == problem && r.variant == variant)
            .collect();
        let n = group.len() as f64;
        let mean_c = group.iter().map(|r| r.best_c_inf).sum::<f64>() / n;
        let mean_kkt = group.iter().map(|r| r.best_kkt_inf).sum::<f64>() / n;
        out.push_str(&format!(
            "{problem} {variant} {:.6e} {:.6e} {}\n",
            mean_c,
            mean_kkt,
            group.len()
        ));
    }
    out
}
