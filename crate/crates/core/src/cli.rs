//! Command-line experiment runner.
//!
//! Subcommands: `list-problems`, `run`, `sweep`, `rate-check`, `compare`.
//! Exit codes: 0 on success, 1 on solver or I/O failure, 2 on bad arguments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{corpus_problems, find_problem};
use crate::driver::{AlphaRule, SolverConfig};
use crate::harness::{
    compare_table, emit_rows_jsonl, emit_summary, emit_trajectory_jsonl, rate_check, sweep_rows,
    ExperimentPlan, RateMeasure, SummaryRow, Variant,
};

#[derive(Parser)]
#[command(
    name = "tssqp",
    about = "Two-stepsize stochastic SQP solver and experiment harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print corpus metadata as JSON.
    ListProblems,
    /// One solver run; emits the trajectory (jsonl) or a one-row summary (csv).
    Run(RunArgs),
    /// Full experiment sweep; emits one summary row per run.
    Sweep(SweepArgs),
    /// Empirical convergence-rate table over increasing iteration budgets.
    RateCheck(RateArgs),
    /// Sweep over all solver variants plus an aggregate comparison table.
    Compare(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliVariant {
    ItsqpExact,
    ItsqpIterative,
    Ssqp,
}

impl CliVariant {
    fn to_variant(self) -> Variant {
        match self {
            CliVariant::ItsqpExact => Variant::ItsqpExact,
            CliVariant::ItsqpIterative => Variant::ItsqpIterative,
            CliVariant::Ssqp => Variant::SsqpBaseline,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliAlphaRule {
    Lower,
    Upper,
    Midpoint,
}

impl CliAlphaRule {
    fn to_rule(self) -> AlphaRule {
        match self {
            CliAlphaRule::Lower => AlphaRule::Lower,
            CliAlphaRule::Upper => AlphaRule::Upper,
            CliAlphaRule::Midpoint => AlphaRule::Midpoint,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct SolverFlags {
    /// Base of the alpha interval.
    #[arg(long, default_value_t = 0.5)]
    alpha_nu: f64,
    /// Width multiplier of the alpha interval.
    #[arg(long, default_value_t = 0.1)]
    alpha_theta: f64,
    /// Trust scale of the normal subproblem.
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Cauchy-decrease fraction required of the normal step.
    #[arg(long, default_value_t = 0.9)]
    epsv: f64,
    /// Merit model-reduction fraction.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Merit-parameter decrease factor.
    #[arg(long, default_value_t = 0.1)]
    epstau: f64,
    /// Feasibility-residual threshold scale of the inexact tangential solve.
    #[arg(long, default_value_t = 0.1)]
    gamma_r: f64,
    /// Stationarity-residual threshold scale of the inexact tangential solve.
    #[arg(long, default_value_t = 0.1)]
    gamma_rho: f64,
    /// Selection rule inside the alpha interval.
    #[arg(long, value_enum, default_value_t = CliAlphaRule::Upper)]
    alpha_rule: CliAlphaRule,
}

impl SolverFlags {
    fn to_config(&self, eta: f64, iterations: usize) -> SolverConfig {
        SolverConfig {
            omega: self.omega,
            eps_v: self.epsv,
            eta,
            theta: self.alpha_theta,
            nu: self.alpha_nu,
            sigma: self.sigma,
            eps_tau: self.epstau,
            gamma_r: self.gamma_r,
            gamma_rho: self.gamma_rho,
            iterations,
            alpha_rule: self.alpha_rule.to_rule(),
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 1e-3)]
    noise: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CliVariant::ItsqpExact)]
    variant: CliVariant,
    #[command(flatten)]
    solver: SolverFlags,
    /// Keep every N-th iteration in the emitted trajectory.
    #[arg(long, default_value_t = 1)]
    log_every: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Jsonl)]
    format: OutputFormat,
}

#[derive(Args)]
struct SweepArgs {
    /// Problems to include (default: the whole corpus).
    #[arg(long)]
    problem: Vec<String>,
    /// Noise levels (default: 1e-4, 1e-3, 1e-2, 1e-1).
    #[arg(long, value_delimiter = ',')]
    noise: Vec<f64>,
    /// Stepsize scales (default: 1e-4, 1e-3, 1e-2, 1e-1, 1).
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    iters: usize,
    /// First seed of the block.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of seeds.
    #[arg(long, default_value_t = 15)]
    seeds: u64,
    /// Solver variants (ignored by `compare`, which runs all of them).
    #[arg(long, value_enum)]
    variant: Vec<CliVariant>,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, default_value_t = 1)]
    log_every: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long, default_value = "P2")]
    problem: String,
    #[arg(long, default_value_t = 1e-2)]
    noise: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, value_enum, default_value_t = CliVariant::ItsqpExact)]
    variant: CliVariant,
    /// Measure to average: jtc-sq or c-norm.
    #[arg(long, value_enum, default_value_t = CliMeasure::JtcSq)]
    measure: CliMeasure,
    /// Iteration budgets, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [500usize, 2000, 8000])]
    budgets: Vec<usize>,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliMeasure {
    JtcSq,
    CNorm,
}

/// Entry point taking raw argv; returns the process exit code.
pub fn cli_main(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match cli.command {
        Command::ListProblems => list_problems(),
        Command::Run(args) => run_command(args),
        Command::Sweep(args) => sweep_command(args, false),
        Command::Compare(args) => sweep_command(args, true),
        Command::RateCheck(args) => rate_command(args),
    }
}

fn list_problems() -> i32 {
    let metas: Vec<_> = corpus_problems().iter().map(|p| p.meta()).collect();
    match serde_json::to_string_pretty(&metas) {
        Ok(json) => {
            println!("{json}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn unknown_problem(name: &str) -> i32 {
    let names: Vec<String> = corpus_problems().iter().map(|p| p.name.clone()).collect();
    eprintln!(
        "error: unknown problem `{name}`; valid names: {}",
        names.join(", ")
    );
    2
}

fn run_command(args: RunArgs) -> i32 {
    let Some(problem) = find_problem(&args.problem) else {
        return unknown_problem(&args.problem);
    };
    let config = args.solver.to_config(args.eta, args.iters);
    if let Err(err) = config.validate() {
        eprintln!("error: {err}");
        return 2;
    }
    if args.log_every == 0 {
        eprintln!("error: --log-every must be positive");
        return 2;
    }
    let record = crate::harness::run_one_logged(
        &problem,
        &config,
        args.noise,
        args.seed,
        args.variant.to_variant(),
        args.log_every,
    );
    if let crate::record::RunStatus::Failed(msg) = &record.status {
        eprintln!("solver failure: {msg}");
        return 1;
    }
    let row = SummaryRow::from_record(&record);
    write_out(args.out.as_deref(), |w| match args.format {
        OutputFormat::Jsonl => emit_trajectory_jsonl(&record.logs, w),
        OutputFormat::Csv => emit_summary(std::slice::from_ref(&row), w),
    })
}

fn sweep_command(args: SweepArgs, compare: bool) -> i32 {
    let problems = if args.problem.is_empty() {
        corpus_problems().iter().map(|p| p.name.clone()).collect()
    } else {
        args.problem.clone()
    };
    for name in &problems {
        if find_problem(name).is_none() {
            return unknown_problem(name);
        }
    }
    let variants = if compare {
        vec![
            Variant::ItsqpExact,
            Variant::ItsqpIterative,
            Variant::SsqpBaseline,
        ]
    } else if args.variant.is_empty() {
        vec![Variant::ItsqpExact]
    } else {
        args.variant.iter().map(|v| v.to_variant()).collect()
    };
    let base = args.solver.to_config(1.0, args.iters);
    if let Err(err) = base.validate() {
        eprintln!("error: {err}");
        return 2;
    }
    if args.seeds == 0 || args.log_every == 0 {
        eprintln!("error: --seeds and --log-every must be positive");
        return 2;
    }
    let plan = ExperimentPlan {
        problems,
        noise_levels: if args.noise.is_empty() {
            vec![1e-4, 1e-3, 1e-2, 1e-1]
        } else {
            args.noise.clone()
        },
        beta_scales: if args.eta.is_empty() {
            vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0]
        } else {
            args.eta.clone()
        },
        seeds: (args.seed..args.seed + args.seeds).collect(),
        budget: args.iters,
        variants,
        base,
        log_every: args.log_every,
    };
    let rows = match sweep_rows(&plan) {
        Ok(rows) => rows,
        Err(err) => {
            eprintln!("error: {err}");
            return 2;
        }
    };
    let failures = rows.iter().filter(|r| r.failed).count();
    let code = write_out(args.out.as_deref(), |w| match args.format {
        OutputFormat::Csv => emit_summary(&rows, w),
        OutputFormat::Jsonl => emit_rows_jsonl(&rows, w),
    });
    if code != 0 {
        return code;
    }
    if compare {
        print!("{}", compare_table(&rows));
    }
    if failures > 0 {
        eprintln!("{failures} run(s) failed");
        return 1;
    }
    0
}

fn rate_command(args: RateArgs) -> i32 {
    if find_problem(&args.problem).is_none() {
        return unknown_problem(&args.problem);
    }
    let base = args.solver.to_config(args.eta, 1);
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
    let measure = match args.measure {
        CliMeasure::JtcSq => RateMeasure::JtcSq,
        CliMeasure::CNorm => RateMeasure::CNorm,
    };
    let table = match rate_check(
        &args.problem,
        &base,
        args.noise,
        args.eta,
        &seeds,
        args.variant.to_variant(),
        measure,
        &args.budgets,
    ) {
        Ok(table) => table,
        Err(err) => {
            eprintln!("error: {err}");
            return 1;
        }
    };
    println!("K,mean_running_avg,ratio_from_prev");
    for (i, row) in table.rows.iter().enumerate() {
        let ratio = if i == 0 {
            String::new()
        } else {
            crate::harness::fmt_float(table.ratios[i - 1])
        };
        println!(
            "{},{},{ratio}",
            row.budget,
            crate::harness::fmt_float(row.mean_running_avg)
        );
    }
    if let Some(path) = args.out.as_deref() {
        let result = write_out(Some(path), |w| {
            writeln!(w, "K,mean_running_avg,ratio_from_prev")?;
            for (i, row) in table.rows.iter().enumerate() {
                let ratio = if i == 0 {
                    String::new()
                } else {
                    crate::harness::fmt_float(table.ratios[i - 1])
                };
                writeln!(
                    w,
                    "{},{},{ratio}",
                    row.budget,
                    crate::harness::fmt_float(row.mean_running_avg)
                )?;
            }
            Ok(())
        });
        if result != 0 {
            return result;
        }
    }
    0
}

fn write_out<F>(path: Option<&std::path::Path>, emit: F) -> i32
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let result = match path {
        Some(path) => File::create(path)
            .map(BufWriter::new)
            .and_then(|mut w| emit(&mut w).and_then(|()| w.flush())),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            emit(&mut lock)
        }
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}
