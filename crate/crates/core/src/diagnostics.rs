//! Deterministic analysis quantities logged alongside each iteration.
//!
//! These are the "true" counterparts of the stochastic step — the tangential
//! component and multipliers recomputed from the exact gradient — plus the
//! merit function, its local model, and the trial/update recursion for the
//! merit parameter. The solver itself never consumes the merit parameter; it
//! is tracked because the synthetic corpus exposes exact gradients, which
//! makes the whole recursion observable and testable.

use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;
use crate::linalg::{inf_norm, JacobianFactor};
use crate::problem::ProblemInstance;
use crate::subproblem::{exact_tangential_with, HessianStrategy};

/// Step quantities recomputed from the exact gradient.
#[derive(Debug, Clone)]
pub struct TrueStepBundle {
    pub u_true: DVector<f64>,
    pub d_true: DVector<f64>,
    /// Minimum-norm least-squares multiplier.
    pub y_true: DVector<f64>,
}

/// Merit-parameter tracker state.
#[derive(Debug, Clone)]
pub struct MeritState {
    pub tau: f64,
    /// Trial value of the most recent update; `f64::INFINITY` encodes the
    /// non-positive-denominator branch.
    pub tau_trial: f64,
    pub history: Vec<(usize, f64)>,
}

impl MeritState {
    pub fn new(tau_init: f64) -> Self {
        assert!(tau_init > 0.0, "initial merit parameter must be positive");
        Self {
            tau: tau_init,
            tau_trial: f64::INFINITY,
            history: Vec::new(),
        }
    }

    pub fn is_monotone_non_increasing(&self) -> bool {
        self.history.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// Computes the true tangential component, multiplier and combined direction
/// at `x` for a given normal component and tangential stepsize.
pub fn true_step(
    problem: &ProblemInstance,
    x: &DVector<f64>,
    h: &HessianStrategy,
    v: &DVector<f64>,
    beta: f64,
) -> Result<TrueStepBundle, SolverError> {
    let grad = problem.gradient(x)?;
    let j = problem.jacobian(x)?;
    let factor = JacobianFactor::new(&j);
    true_step_with(&factor, &j, &grad, h, v, beta)
}

/// Same as [`true_step`] with precomputed gradient, Jacobian and factor.
pub fn true_step_with(
    factor: &JacobianFactor,
    j: &DMatrix<f64>,
    grad: &DVector<f64>,
    h: &HessianStrategy,
    v: &DVector<f64>,
    beta: f64,
) -> Result<TrueStepBundle, SolverError> {
    let res = exact_tangential_with(factor, h, j, grad, v)?;
    let d_true = beta * &res.u + v;
    Ok(TrueStepBundle {
        u_true: res.u,
        d_true,
        y_true: res.y,
    })
}

/// Merit function `tau * f + ||c||`.
pub fn merit_phi(tau: f64, f_val: f64, c_norm: f64) -> f64 {
    tau * f_val + c_norm
}

/// Reduction of the local merit model for direction `d`:
/// `-tau g^T d + ||c|| - ||c + J d||`.
pub fn model_reduction(
    tau: f64,
    g: &DVector<f64>,
    d: &DVector<f64>,
    c: &DVector<f64>,
    j: &DMatrix<f64>,
) -> f64 {
    -tau * g.dot(d) + c.norm() - (c + j * d).norm()
}

/// One step of the merit-parameter recursion.
///
/// The trial value is `(1 - sigma) (||c|| - ||c + J v||) / q` with
/// `q = grad_f^T d_true + beta u_true^T H u_true`, or infinity when
/// `q <= 0`; the parameter then either stays or drops to
/// `min((1 - eps_tau) tau, trial)`. Returns the denominator `q` for
/// diagnostic use.
#[allow(clippy::too_many_arguments)]
pub fn tau_update(
    state: &mut MeritState,
    grad_f: &DVector<f64>,
    d_true: &DVector<f64>,
    beta: f64,
    u_true: &DVector<f64>,
    h: &HessianStrategy,
    c: &DVector<f64>,
    j: &DMatrix<f64>,
    v: &DVector<f64>,
    sigma: f64,
    eps_tau: f64,
) -> f64 {
    assert!(sigma > 0.0 && sigma < 1.0, "sigma must lie in (0, 1)");
    assert!((0.0..1.0).contains(&eps_tau), "eps_tau must lie in [0, 1)");
    let q = grad_f.dot(d_true) + beta * u_true.dot(&h.apply(u_true));
    let reduction = c.norm() - (c + j * v).norm();
    let trial = if q <= 0.0 {
        f64::INFINITY
    } else {
        (1.0 - sigma) * reduction / q
    };
    let tau_next = if state.tau <= trial {
        state.tau
    } else {
        ((1.0 - eps_tau) * state.tau).min(trial)
    };
    state.tau_trial = trial;
    state.tau = tau_next;
    let k = state.history.len();
    state.history.push((k, tau_next));
    q
}

/// Feasibility and first-order stationarity scalars at a point.
#[derive(Debug, Clone, Copy)]
pub struct StationarityReport {
    /// `||J^T c||` — stationarity of the infeasibility measure.
    pub jtc_norm: f64,
    pub c_norm: f64,
    /// `||grad f + J^T y_true||`.
    pub kkt_norm: f64,
    pub kkt_inf_norm: f64,
}

/// Evaluates all stationarity measures from the deterministic oracles.
pub fn stationarity_measures(
    problem: &ProblemInstance,
    x: &DVector<f64>,
    h: &HessianStrategy,
    v: &DVector<f64>,
    beta: f64,
) -> Result<StationarityReport, SolverError> {
    let grad = problem.gradient(x)?;
    let c = problem.constraints(x)?;
    let j = problem.jacobian(x)?;
    let factor = JacobianFactor::new(&j);
    let bundle = true_step_with(&factor, &j, &grad, h, v, beta)?;
    let (kkt_norm, kkt_inf_norm) = kkt_measures(&grad, &j, &bundle.y_true);
    Ok(StationarityReport {
        jtc_norm: (j.transpose() * &c).norm(),
        c_norm: c.norm(),
        kkt_norm,
        kkt_inf_norm,
    })
}

/// Norms of the Lagrangian gradient `grad f + J^T y`.
pub fn kkt_measures(grad: &DVector<f64>, j: &DMatrix<f64>, y: &DVector<f64>) -> (f64, f64) {
    let kkt = grad + j.transpose() * y;
    (kkt.norm(), inf_norm(&kkt))
}
