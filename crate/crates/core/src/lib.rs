//! Two-stepsize stochastic SQP for equality-constrained problems whose
//! constraint Jacobians may be rank deficient.
//!
//! The solver decomposes each step into a normal component (a trust-region
//! Gauss-Newton step toward linearized feasibility, certified against a
//! Cauchy-decrease fraction) and a tangential component (a null-space
//! Newton step on a stochastic gradient estimate, solved exactly or by a
//! MINRES iteration stopped by stepsize-proportional residual tests). The
//! tangential part is scaled by `beta = eta / sqrt(K)` to control gradient
//! noise, and the combined step by `alpha` from a `beta`-sized interval.
//!
//! The crate ships an embedded problem corpus, per-iteration diagnostics
//! (true steps, least-squares multipliers, merit-parameter tracking), an
//! experiment harness for seeded sweeps with reproducible parallelism, and
//! a CLI (`tssqp`) exposing all of it.

pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problem;
pub mod record;
pub mod subproblem;

pub use corpus::{corpus_problems, find_problem};
pub use driver::{
    alpha_select, beta_schedule, run, run_with, suggest_nu, AlphaRule, NuEstimates, NuSuggestion,
    RunHooks, SolverConfig, StepLaw,
};
pub use error::SolverError;
pub use harness::{
    derive_stream_seed, emit_summary, rate_check, run_one, ssqp_baseline_run, sweep,
    sweep_sequential, ExperimentPlan, RateMeasure, SummaryRow, Variant,
};
pub use problem::{
    finite_difference_check, FiniteDifferenceReport, GradientOracle, NoiseSpec, ProblemInstance,
};
pub use record::{
    early_stop, select_best, BestIterateSummary, IterationLog, RunRecord, RunStatus,
    FEASIBILITY_TOL, KKT_STOP_TOL,
};
pub use subproblem::{
    cauchy_alpha, exact_tangential, inexact_tangential, normal_step, range_null_split,
    residual_pair, HessianStrategy, NormalStepResult, TangentialMode, TangentialStepResult,
};
