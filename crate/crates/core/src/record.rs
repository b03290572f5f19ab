//! Run records: per-iteration logs, the best-iterate selection rule and the
//! early-stop test.
//!
//! An iterate is treated as feasible when `||c||_inf <= 1e-6`. Among feasible
//! iterates the best one minimizes the infinity norm of the Lagrangian
//! gradient; when no iterate is feasible the most feasible one is reported
//! instead. A run stops early once a feasible iterate also drives that
//! KKT measure below `1e-4`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Infinity-norm constraint violation below which an iterate counts as
/// feasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Infinity-norm KKT residual for early termination at a feasible iterate.
pub const KKT_STOP_TOL: f64 = 1e-4;

/// One iteration of a solver run. Serialized unchanged as one JSONL object
/// per line in trajectory output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationLog {
    pub k: usize,
    pub x: Vec<f64>,
    pub f_val: f64,
    pub c_norm: f64,
    pub c_inf_norm: f64,
    pub jtc_norm: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub beta: f64,
    pub alpha: f64,
    pub rho_norm: f64,
    pub r_norm: f64,
    /// Merit parameter after this iteration's update; absent when the
    /// tracker is disabled (no deterministic gradient available).
    pub tau: Option<f64>,
    pub kkt_norm: f64,
    pub kkt_inf_norm: f64,
    pub smallest_nonzero_singular_value: f64,
}

/// Best-iterate summary under the feasibility-gated selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestIterateSummary {
    pub k_best: usize,
    pub feasible: bool,
    pub kkt_inf: f64,
    pub c_inf: f64,
}

/// Why a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    /// Ran the whole iteration budget.
    Completed,
    /// Stopped by the success test before the budget.
    EarlyStopped,
    /// Aborted; the record holds the iterations finished before the failure.
    Failed(String),
}

/// A full solver run: plan coordinates, the (possibly thinned) trajectory,
/// and the best-iterate summary computed from the stored trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub noise: f64,
    /// Second-moment bound on the gradient error under the isotropic noise
    /// model: `n * noise`.
    pub noise_second_moment: f64,
    pub eta: f64,
    pub seed: u64,
    pub variant: String,
    pub logs: Vec<IterationLog>,
    pub best: Option<BestIterateSummary>,
    pub terminated_early: bool,
    pub status: RunStatus,
    /// Iterations actually executed (the stored trajectory may be thinner).
    pub iterations_run: usize,
    /// `||J^T c||` at the last executed iterate.
    pub final_jtc: f64,
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        matches!(self.status, RunStatus::Failed(_))
    }
}

/// Applies the best-iterate rule to a trajectory. Ties are broken toward the
/// smaller iteration index. Returns `None` on an empty trajectory.
pub fn select_best(logs: &[IterationLog]) -> Option<BestIterateSummary> {
    if logs.is_empty() {
        return None;
    }
    let feasible = logs
        .iter()
        .filter(|l| l.c_inf_norm <= FEASIBILITY_TOL)
        .min_by(|a, b| {
            a.kkt_inf_norm
                .partial_cmp(&b.kkt_inf_norm)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    let chosen = match feasible {
        Some(l) => l,
        None => logs
            .iter()
            .min_by(|a, b| {
                a.c_inf_norm
                    .partial_cmp(&b.c_inf_norm)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty"),
    };
    Some(BestIterateSummary {
        k_best: chosen.k,
        feasible: chosen.c_inf_norm <= FEASIBILITY_TOL,
        kkt_inf: chosen.kkt_inf_norm,
        c_inf: chosen.c_inf_norm,
    })
}

/// Success test evaluated on every fresh iterate: feasible and first-order
/// stationary at the reporting tolerances.
pub fn early_stop(log: &IterationLog) -> bool {
    log.c_inf_norm <= FEASIBILITY_TOL && log.kkt_inf_norm <= KKT_STOP_TOL
}
