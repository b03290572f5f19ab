//! The two-stepsize solver loop.
//!
//! Each iteration computes the normal component from the deterministic
//! constraint oracles, draws a stochastic gradient estimate, computes the
//! tangential component exactly or inexactly, assembles
//! `d = beta * u + v`, and takes the step `x <- x + alpha * d` with
//! `beta = eta / sqrt(K)` and `alpha` chosen from `[nu, nu + theta * beta]`.
//! A single-stepsize baseline (`beta = 1`, `alpha = nu`) shares the exact
//! same loop, so per-iteration logging is identical across variants.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{kkt_measures, tau_update, true_step_with, MeritState};
use crate::error::SolverError;
use crate::linalg::{inf_norm, JacobianFactor};
use crate::problem::GradientOracle;
use crate::record::{select_best, IterationLog, RunRecord, RunStatus};
use crate::subproblem::{
    exact_tangential_with, inexact_tangential, normal_step, HessianStrategy, NormalStepResult,
    TangentialMode, TangentialStepResult,
};

/// Rule for picking the second stepsize inside `[nu, nu + theta * beta]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaRule {
    Lower,
    Upper,
    Midpoint,
}

/// Which step law the loop follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepLaw {
    /// `d = beta u + v` with `beta = eta / sqrt(K)`, `alpha` from the interval.
    TwoStepsize,
    /// Single-stepsize baseline: `d = u + v`, `alpha = nu`.
    SingleStepsize,
}

/// All algorithm parameters of one run.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Trust scale of the normal subproblem.
    pub omega: f64,
    /// Fraction of Cauchy decrease the normal step must certify, in (0, 1].
    pub eps_v: f64,
    /// Scale of the tangential stepsize `beta = eta / sqrt(K)`.
    pub eta: f64,
    /// Width multiplier of the `alpha` interval.
    pub theta: f64,
    /// Base of the `alpha` interval.
    pub nu: f64,
    /// Fraction of the constraint-model reduction retained by the merit
    /// parameter update, in (0, 1).
    pub sigma: f64,
    /// Geometric decrease factor of the merit parameter, in [0, 1).
    pub eps_tau: f64,
    /// Initial merit parameter.
    pub tau_init: f64,
    /// Residual thresholds of the inexact tangential solve, scaled by beta.
    pub gamma_r: f64,
    pub gamma_rho: f64,
    /// Iteration budget K.
    pub iterations: usize,
    pub tangential_mode: TangentialMode,
    pub hessian: HessianStrategy,
    pub alpha_rule: AlphaRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            eps_v: 0.9,
            eta: 1.0,
            theta: 0.1,
            nu: 0.5,
            sigma: 0.5,
            eps_tau: 0.1,
            tau_init: 1.0,
            gamma_r: 0.1,
            gamma_rho: 0.1,
            iterations: 10_000,
            tangential_mode: TangentialMode::Exact,
            hessian: HessianStrategy::Identity,
            alpha_rule: AlphaRule::Upper,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            (self.omega, "omega"),
            (self.eta, "eta"),
            (self.theta, "theta"),
            (self.nu, "nu"),
            (self.tau_init, "tau_init"),
            (self.gamma_r, "gamma_r"),
            (self.gamma_rho, "gamma_rho"),
        ];
        for (value, name) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SolverError::InvalidConfig(format!(
                    "{name} must be positive"
                )));
            }
        }
        if !(self.eps_v > 0.0 && self.eps_v <= 1.0) {
            return Err(SolverError::InvalidConfig(
                "eps_v must lie in (0, 1]".into(),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(SolverError::InvalidConfig(
                "sigma must lie in (0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.eps_tau) {
            return Err(SolverError::InvalidConfig(
                "eps_tau must lie in [0, 1)".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(SolverError::InvalidConfig(
                "iteration budget must be positive".into(),
            ));
        }
        let beta0 = beta_schedule(self, 0);
        if self.nu + self.theta * beta0 > 1.0 {
            return Err(SolverError::InvalidConfig(format!(
                "nu + theta * beta = {} exceeds 1; alpha would leave (0, 1]",
                self.nu + self.theta * beta0
            )));
        }
        Ok(())
    }
}

/// Constant tangential stepsize `eta / sqrt(K)`.
pub fn beta_schedule(config: &SolverConfig, _k: usize) -> f64 {
    config.eta / (config.iterations as f64).sqrt()
}

/// Deterministic selection of `alpha` inside `[nu, nu + theta * beta]`.
pub fn alpha_select(config: &SolverConfig, beta: f64) -> f64 {
    match config.alpha_rule {
        AlphaRule::Lower => config.nu,
        AlphaRule::Upper => config.nu + config.theta * beta,
        AlphaRule::Midpoint => config.nu + 0.5 * config.theta * beta,
    }
}

/// Everything the loop knows about one iteration, exposed to observers so
/// invariants can be checked on live values without re-running the solver.
pub struct IterationWitness<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    pub c: &'a DVector<f64>,
    pub j: &'a DMatrix<f64>,
    /// Exact gradient at `x`.
    pub grad: &'a DVector<f64>,
    /// Stochastic gradient estimate used for the tangential step.
    pub g: &'a DVector<f64>,
    pub normal: &'a NormalStepResult,
    pub tangential: &'a TangentialStepResult,
    pub u_true: &'a DVector<f64>,
    pub d_true: &'a DVector<f64>,
    pub y_true: &'a DVector<f64>,
    pub beta: f64,
    pub alpha: f64,
    pub tau: f64,
    /// Denominator of the merit-parameter trial value at this iteration.
    pub tau_denominator: f64,
}

/// Per-run hooks: an optional stop test evaluated on every fresh log entry
/// and an optional observer fed the full iteration state.
#[derive(Default)]
pub struct RunHooks<'a> {
    pub stop: Option<&'a mut dyn FnMut(&IterationLog) -> bool>,
    pub observer: Option<&'a mut dyn FnMut(&IterationWitness<'_>)>,
    /// Store every `log_every`-th iteration (the final one is always kept).
    pub log_every: usize,
}

impl<'a> RunHooks<'a> {
    pub fn with_stop(stop: &'a mut dyn FnMut(&IterationLog) -> bool) -> Self {
        Self {
            stop: Some(stop),
            observer: None,
            log_every: 1,
        }
    }
}

/// Runs the two-stepsize loop with default hooks and full logging.
pub fn run(
    problem: &Arc<crate::problem::ProblemInstance>,
    oracle: &mut GradientOracle,
    config: &SolverConfig,
) -> RunRecord {
    run_with(
        problem,
        oracle,
        config,
        StepLaw::TwoStepsize,
        RunHooks::default(),
    )
}

/// Runs the loop under an explicit step law with hooks.
pub fn run_with(
    problem: &Arc<crate::problem::ProblemInstance>,
    oracle: &mut GradientOracle,
    config: &SolverConfig,
    law: StepLaw,
    mut hooks: RunHooks<'_>,
) -> RunRecord {
    let started = Instant::now();
    let log_every = hooks.log_every.max(1);
    let variant = variant_label(law, config.tangential_mode);
    let noise = oracle.noise();
    let mut record = RunRecord {
        problem: problem.name.clone(),
        noise: noise.epsilon_n,
        noise_second_moment: noise.second_moment_bound(problem.n),
        eta: config.eta,
        seed: noise.seed,
        variant: variant.to_string(),
        logs: Vec::new(),
        best: None,
        terminated_early: false,
        status: RunStatus::Completed,
        iterations_run: 0,
        final_jtc: f64::NAN,
        wall_time: started.elapsed(),
    };
    if let Err(err) = config.validate() {
        record.status = RunStatus::Failed(err.to_string());
        record.wall_time = started.elapsed();
        return record;
    }

    let n = problem.n;
    let mut x = problem.x0.clone();
    let mut merit = MeritState::new(config.tau_init);

    for k in 0..config.iterations {
        let step = iterate_once(problem, oracle, config, law, k, &x, &mut merit);
        let (log, witness_data) = match step {
            Ok(parts) => parts,
            Err(err) => {
                record.status = RunStatus::Failed(err.to_string());
                break;
            }
        };
        record.iterations_run = k + 1;
        record.final_jtc = log.jtc_norm;

        if let Some(observer) = hooks.observer.as_deref_mut() {
            let w = IterationWitness {
                k,
                x: &x,
                c: &witness_data.c,
                j: &witness_data.j,
                grad: &witness_data.grad,
                g: &witness_data.g,
                normal: &witness_data.normal,
                tangential: &witness_data.tangential,
                u_true: &witness_data.u_true,
                d_true: &witness_data.d_true,
                y_true: &witness_data.y_true,
                beta: log.beta,
                alpha: log.alpha,
                tau: merit.tau,
                tau_denominator: witness_data.tau_denominator,
            };
            observer(&w);
        }

        let stop_now = match hooks.stop.as_deref_mut() {
            Some(test) => test(&log),
            None => false,
        };
        let last = k + 1 == config.iterations;
        if k % log_every == 0 || stop_now || last {
            record.logs.push(log.clone());
        }
        if stop_now {
            record.terminated_early = true;
            record.status = RunStatus::EarlyStopped;
            break;
        }

        // x_{k+1} = x_k + alpha_k d_k
        for i in 0..n {
            x[i] += log.alpha * log.d[i];
        }
    }

    record.best = select_best(&record.logs);
    record.wall_time = started.elapsed();
    record
}

struct WitnessData {
    c: DVector<f64>,
    j: DMatrix<f64>,
    grad: DVector<f64>,
    g: DVector<f64>,
    normal: NormalStepResult,
    tangential: TangentialStepResult,
    u_true: DVector<f64>,
    d_true: DVector<f64>,
    y_true: DVector<f64>,
    tau_denominator: f64,
}

#[allow(clippy::too_many_arguments)]
fn iterate_once(
    problem: &Arc<crate::problem::ProblemInstance>,
    oracle: &mut GradientOracle,
    config: &SolverConfig,
    law: StepLaw,
    k: usize,
    x: &DVector<f64>,
    merit: &mut MeritState,
) -> Result<(IterationLog, WitnessData), SolverError> {
    let f_val = problem.objective(x)?;
    let c = problem.constraints(x)?;
    let j = problem.jacobian(x)?;
    let factor = JacobianFactor::new(&j);

    let normal = normal_step(&j, &c, config.omega, config.eps_v, 2 * problem.n + 4)?;
    let g = oracle.sample_gradient(x)?;

    let beta = match law {
        StepLaw::TwoStepsize => beta_schedule(config, k),
        StepLaw::SingleStepsize => 1.0,
    };
    let tangential = match config.tangential_mode {
        TangentialMode::Exact => {
            exact_tangential_with(&factor, &config.hessian, &j, &g, &normal.v)?
        }
        TangentialMode::Iterative => inexact_tangential(
            &config.hessian,
            &j,
            &g,
            &normal.v,
            beta,
            config.gamma_r,
            config.gamma_rho,
            problem.n + problem.m,
        )?,
    };
    let d = DVector::from_iterator(
        problem.n,
        tangential
            .u
            .iter()
            .zip(normal.v.iter())
            .map(|(u, v)| beta * u + v),
    );
    let alpha = match law {
        StepLaw::TwoStepsize => alpha_select(config, beta),
        StepLaw::SingleStepsize => config.nu,
    };

    // True-step diagnostics from the exact gradient.
    let grad = problem.gradient(x)?;
    let bundle = true_step_with(&factor, &j, &grad, &config.hessian, &normal.v, beta)?;
    let q = tau_update(
        merit,
        &grad,
        &bundle.d_true,
        beta,
        &bundle.u_true,
        &config.hessian,
        &c,
        &j,
        &normal.v,
        config.sigma,
        config.eps_tau,
    );
    let (kkt_norm, kkt_inf_norm) = kkt_measures(&grad, &j, &bundle.y_true);

    let log = IterationLog {
        k,
        x: x.iter().copied().collect(),
        f_val,
        c_norm: c.norm(),
        c_inf_norm: inf_norm(&c),
        jtc_norm: (j.transpose() * &c).norm(),
        v: normal.v.iter().copied().collect(),
        u: tangential.u.iter().copied().collect(),
        d: d.iter().copied().collect(),
        beta,
        alpha,
        rho_norm: tangential.rho.norm(),
        r_norm: tangential.r.norm(),
        tau: Some(merit.tau),
        kkt_norm,
        kkt_inf_norm,
        smallest_nonzero_singular_value: factor.smallest_nonzero_singular_value(),
    };
    let witness = WitnessData {
        c,
        j,
        grad,
        g,
        normal,
        u_true: bundle.u_true,
        d_true: bundle.d_true,
        y_true: bundle.y_true,
        tangential,
        tau_denominator: q,
    };
    Ok((log, witness))
}

fn variant_label(law: StepLaw, mode: TangentialMode) -> &'static str {
    match (law, mode) {
        (StepLaw::TwoStepsize, TangentialMode::Exact) => "itsqp-exact",
        (StepLaw::TwoStepsize, TangentialMode::Iterative) => "itsqp-iterative",
        (StepLaw::SingleStepsize, _) => "ssqp-style",
    }
}

/// Inputs of the advisory stepsize-base formula. `tau_min` carries the
/// merit-parameter bound when one is assumed; `None` selects the vanishing
/// merit-parameter variant, which only needs the Jacobian smoothness
/// constant.
#[derive(Debug, Clone, Copy)]
pub struct NuEstimates {
    pub sigma: f64,
    pub kappa_v: f64,
    pub kappa_c: f64,
    pub tau_min: Option<f64>,
    /// Lipschitz constant of the objective gradient.
    pub grad_lipschitz: f64,
    /// Lipschitz constant of the constraint Jacobian.
    pub jac_lipschitz: f64,
    pub omega: f64,
    pub theta: f64,
    pub kappa_beta: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NuSuggestion {
    pub nu: f64,
    /// False when the interval constraint `theta * kappa_beta < 1` fails.
    pub valid: bool,
}

/// Advisory value for the stepsize base: the smaller of the descent branch
/// (which needs smoothness constants) and the interval branch
/// `1 - theta * kappa_beta`. Runs always use the configured value; this
/// exposes the formula for users who have estimates.
pub fn suggest_nu(est: &NuEstimates) -> NuSuggestion {
    let descent = match est.tau_min {
        Some(tau_min) => {
            est.sigma * est.kappa_v
                / (est.kappa_c
                    * 2.0
                    * (tau_min * est.grad_lipschitz + est.jac_lipschitz)
                    * est.omega
                    * est.omega)
        }
        None => est.kappa_v / (est.kappa_c * 2.0 * est.jac_lipschitz * est.omega * est.omega),
    };
    let interval = 1.0 - est.theta * est.kappa_beta;
    let nu = descent.min(interval);
    NuSuggestion {
        nu,
        valid: nu > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::find_problem;
    use crate::problem::{GradientOracle, NoiseSpec};
    use approx::assert_relative_eq;

    #[test]
    fn beta_schedule_examples() {
        let mut config = SolverConfig {
            eta: 1.0,
            iterations: 100,
            ..Default::default()
        };
        assert_relative_eq!(beta_schedule(&config, 0), 0.1, epsilon = 1e-15);
        config.eta = 2.0;
        config.iterations = 400;
        assert_relative_eq!(beta_schedule(&config, 17), 0.1, epsilon = 1e-15);
        config.eta = 1.0;
        config.iterations = 1;
        assert_relative_eq!(beta_schedule(&config, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn alpha_select_rules() {
        let mut config = SolverConfig {
            nu: 0.5,
            theta: 0.1,
            ..Default::default()
        };
        config.alpha_rule = AlphaRule::Upper;
        assert_relative_eq!(alpha_select(&config, 0.1), 0.51, epsilon = 1e-15);
        config.alpha_rule = AlphaRule::Lower;
        assert_relative_eq!(alpha_select(&config, 0.1), 0.5, epsilon = 1e-15);
        config.alpha_rule = AlphaRule::Midpoint;
        assert_relative_eq!(alpha_select(&config, 0.1), 0.505, epsilon = 1e-15);

        // Wide interval still admissible as long as alpha stays below one.
        let wide = SolverConfig {
            nu: 0.5,
            theta: 4.0,
            eta: 1.0,
            iterations: 100,
            ..Default::default()
        };
        assert_relative_eq!(alpha_select(&wide, 0.1), 0.9, epsilon = 1e-15);
        assert!(wide.validate().is_ok());
        let too_wide = SolverConfig { theta: 6.0, ..wide };
        assert!(too_wide.validate().is_err());
    }

    #[test]
    fn single_iteration_bookkeeping() {
        let p = find_problem("P1").unwrap();
        let config = SolverConfig {
            iterations: 1,
            ..Default::default()
        };
        let mut oracle = GradientOracle::new(p.clone(), NoiseSpec::new(0.0, 1));
        let record = run(&p, &mut oracle, &config);
        assert_eq!(record.logs.len(), 1);
        assert_eq!(record.iterations_run, 1);
        let log = &record.logs[0];
        for i in 0..p.n {
            assert_eq!(log.d[i], log.beta * log.u[i] + log.v[i]);
        }
        // x1 = x0 + alpha0 d0 is where a second run would start.
        assert_eq!(log.x, vec![2.0, 2.0]);
    }

    #[test]
    fn identical_inputs_give_identical_trajectories() {
        let p = find_problem("Q3").unwrap();
        let config = SolverConfig {
            iterations: 40,
            ..Default::default()
        };
        let mut a = GradientOracle::new(p.clone(), NoiseSpec::new(1e-2, 5));
        let mut b = GradientOracle::new(p.clone(), NoiseSpec::new(1e-2, 5));
        let ra = run(&p, &mut a, &config);
        let rb = run(&p, &mut b, &config);
        assert_eq!(ra.logs.len(), rb.logs.len());
        for (la, lb) in ra.logs.iter().zip(rb.logs.iter()) {
            assert_eq!(la.x, lb.x);
            assert_eq!(la.u, lb.u);
            assert_eq!(la.tau, lb.tau);
        }
    }

    #[test]
    fn iterative_mode_residuals_respect_thresholds() {
        let p = find_problem("Q1").unwrap();
        let config = SolverConfig {
            iterations: 60,
            tangential_mode: TangentialMode::Iterative,
            gamma_r: 0.5,
            gamma_rho: 0.5,
            ..Default::default()
        };
        let mut oracle = GradientOracle::new(p.clone(), NoiseSpec::new(1e-3, 9));
        let record = run(&p, &mut oracle, &config);
        assert!(!record.failed());
        let beta = beta_schedule(&config, 0);
        for log in &record.logs {
            assert!(log.r_norm <= config.gamma_r * beta);
            assert!(log.rho_norm <= config.gamma_rho * beta);
        }
    }

    #[test]
    fn evaluation_failure_aborts_with_partial_record() {
        use crate::problem::ProblemInstance;
        use nalgebra::{DMatrix, DVector};
        use std::sync::Arc;
        // The gradient turns non-finite once the iterate crosses 1.7, which
        // the constraint steers it toward within a few steps.
        let p = Arc::new(ProblemInstance::new(
            "poisoned",
            1,
            1,
            Box::new(|x: &DVector<f64>| 0.5 * x[0] * x[0]),
            Box::new(|x: &DVector<f64>| {
                DVector::from_vec(vec![if x[0] < 1.7 { f64::NAN } else { x[0] } ])
            }),
            Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0] - 1.0])),
            Box::new(|_| DMatrix::from_element(1, 1, 1.0)),
            DVector::from_vec(vec![3.0]),
            None,
            true,
            true,
        ));
        let config = SolverConfig { iterations: 50, ..Default::default() };
        let mut oracle = GradientOracle::new(p.clone(), NoiseSpec::new(0.0, 1));
        let record = run(&p, &mut oracle, &config);
        assert!(record.failed());
        assert!(record.iterations_run > 0, "expected progress before the failure");
        assert!(record.iterations_run < config.iterations);
        assert!(!record.logs.is_empty());
        match &record.status {
            crate::record::RunStatus::Failed(msg) => {
                assert!(msg.contains("non-finite"), "tag: {msg}")
            }
            other => panic!("unexpected status {other:?}"),
        }
    }

    #[test]
    fn curvature_failure_aborts_with_tag() {
        use crate::subproblem::HessianStrategy;
        use nalgebra::DMatrix;
        let p = find_problem("P1").unwrap();
        // Negative curvature on the null space of the constraint Jacobian.
        let h =
            HessianStrategy::supplied(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), 1.0)
                .unwrap();
        let config = SolverConfig { iterations: 10, hessian: h, ..Default::default() };
        let mut oracle = GradientOracle::new(p.clone(), NoiseSpec::new(0.0, 1));
        let record = run(&p, &mut oracle, &config);
        assert!(record.failed());
        match &record.status {
            crate::record::RunStatus::Failed(msg) => {
                assert!(msg.contains("curvature"), "tag: {msg}")
            }
            other => panic!("unexpected status {other:?}"),
        }
    }

    #[test]
    fn baseline_law_logs_unit_beta() {
        let p = find_problem("P1").unwrap();
        let config = SolverConfig {
            iterations: 5,
            ..Default::default()
        };
        let mut oracle = GradientOracle::new(p.clone(), NoiseSpec::new(0.0, 1));
        let record = run_with(
            &p,
            &mut oracle,
            &config,
            StepLaw::SingleStepsize,
            RunHooks::default(),
        );
        assert_eq!(record.variant, "ssqp-style");
        for log in &record.logs {
            assert_eq!(log.beta, 1.0);
            assert_eq!(log.alpha, config.nu);
        }
    }

    #[test]
    fn suggest_nu_formula_branches() {
        let with_tau = NuEstimates {
            sigma: 0.5,
            kappa_v: 1.0,
            kappa_c: 1.0,
            tau_min: Some(1.0),
            grad_lipschitz: 1.0,
            jac_lipschitz: 1.0,
            omega: 1.0,
            theta: 1.0,
            kappa_beta: 0.5,
        };
        let s = suggest_nu(&with_tau);
        assert_relative_eq!(s.nu, 0.125, epsilon = 1e-15);
        assert!(s.valid);

        let vanishing = NuEstimates {
            tau_min: None,
            ..with_tau
        };
        let s = suggest_nu(&vanishing);
        assert_relative_eq!(s.nu, 0.5, epsilon = 1e-15);
        assert!(s.valid);

        let infeasible = NuEstimates {
            kappa_beta: 1.2,
            ..with_tau
        };
        let s = suggest_nu(&infeasible);
        assert!(s.nu <= 0.0);
        assert!(!s.valid);
    }
}
