//! Problem abstraction and the stochastic gradient oracle.
//!
//! A [`ProblemInstance`] bundles deterministic oracles for a smooth objective
//! and smooth equality constraints together with metadata (dimensions, known
//! solution, rank structure). A [`GradientOracle`] wraps a problem with an
//! isotropic Gaussian noise model and a seeded stream, producing stochastic
//! gradient estimates that are unbiased with per-component variance
//! `epsilon_n`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::SolverError;

type ScalarFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A smooth equality-constrained test problem
/// `min f(x)  s.t.  c(x) = 0, c: R^n -> R^m`.
///
/// Instances are immutable; share them through `Arc`.
pub struct ProblemInstance {
    pub name: String,
    pub n: usize,
    pub m: usize,
    f: ScalarFn,
    grad_f: VectorFn,
    c: VectorFn,
    jac_c: MatrixFn,
    /// Canonical starting point for solver runs.
    pub x0: DVector<f64>,
    pub known_solution: Option<DVector<f64>>,
    /// Whether the constraint Jacobian has full row rank at every point
    /// (metadata only; nothing is enforced at runtime).
    pub licq_everywhere: bool,
    /// Whether the constraint set is nonempty (metadata only).
    pub feasible: bool,
}

/// Exported problem metadata (`list-problems` JSON schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub licq_everywhere: bool,
    pub feasible: bool,
    pub known_solution: Option<Vec<f64>>,
}

impl ProblemInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        n: usize,
        m: usize,
        f: ScalarFn,
        grad_f: VectorFn,
        c: VectorFn,
        jac_c: MatrixFn,
        x0: DVector<f64>,
        known_solution: Option<DVector<f64>>,
        licq_everywhere: bool,
        feasible: bool,
    ) -> Self {
        assert!(n > 0 && m > 0, "dimensions must be positive");
        assert_eq!(x0.len(), n);
        Self {
            name: name.into(),
            n,
            m,
            f,
            grad_f,
            c,
            jac_c,
            x0,
            known_solution,
            licq_everywhere,
            feasible,
        }
    }

    pub fn objective(&self, x: &DVector<f64>) -> Result<f64, SolverError> {
        let val = (self.f)(x);
        if !val.is_finite() {
            return Err(self.eval_failure("objective", x));
        }
        Ok(val)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
        let g = (self.grad_f)(x);
        debug_assert_eq!(g.len(), self.n);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(self.eval_failure("gradient", x));
        }
        Ok(g)
    }

    pub fn constraints(&self, x: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
        let c = (self.c)(x);
        debug_assert_eq!(c.len(), self.m);
        if c.iter().any(|v| !v.is_finite()) {
            return Err(self.eval_failure("constraint", x));
        }
        Ok(c)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, SolverError> {
        let j = (self.jac_c)(x);
        debug_assert_eq!(j.shape(), (self.m, self.n));
        if j.iter().any(|v| !v.is_finite()) {
            return Err(self.eval_failure("jacobian", x));
        }
        Ok(j)
    }

    pub fn meta(&self) -> ProblemMeta {
        ProblemMeta {
            name: self.name.clone(),
            n: self.n,
            m: self.m,
            licq_everywhere: self.licq_everywhere,
            feasible: self.feasible,
            known_solution: self
                .known_solution
                .as_ref()
                .map(|x| x.iter().copied().collect()),
        }
    }

    fn eval_failure(&self, what: &'static str, x: &DVector<f64>) -> SolverError {
        SolverError::EvaluationFailure {
            what,
            x: x.iter().copied().collect(),
        }
    }
}

/// Isotropic Gaussian noise specification for gradient estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-component noise variance; 0 yields the exact gradient.
    pub epsilon_n: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(epsilon_n: f64, seed: u64) -> Self {
        assert!(epsilon_n >= 0.0, "noise variance must be nonnegative");
        Self { epsilon_n, seed }
    }

    /// Second-moment bound on the gradient error for this noise model,
    /// `n * epsilon_n`. Recorded in run metadata.
    pub fn second_moment_bound(&self, n: usize) -> f64 {
        n as f64 * self.epsilon_n
    }
}

/// Stateful stochastic gradient source: one oracle per run.
pub struct GradientOracle {
    problem: Arc<ProblemInstance>,
    noise: NoiseSpec,
    rng: ChaCha8Rng,
}

impl GradientOracle {
    pub fn new(problem: Arc<ProblemInstance>, noise: NoiseSpec) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(noise.seed);
        Self {
            problem,
            noise,
            rng,
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn problem(&self) -> &Arc<ProblemInstance> {
        &self.problem
    }

    /// Draws `grad_f(x) + z`, `z ~ N(0, epsilon_n I)`, advancing the stream.
    /// With `epsilon_n = 0` the exact gradient is returned and the stream is
    /// left untouched.
    pub fn sample_gradient(&mut self, x: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
        let mut g = self.problem.gradient(x)?;
        if self.noise.epsilon_n > 0.0 {
            let sd = self.noise.epsilon_n.sqrt();
            for gi in g.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                *gi += sd * z;
            }
        }
        Ok(g)
    }
}

/// Result of comparing analytic derivatives against central differences.
#[derive(Debug, Clone, Copy)]
pub struct FiniteDifferenceReport {
    /// Max over components of `|fd - analytic| / max(1, |analytic|)`.
    pub grad_max_rel_err: f64,
    /// Same measure over all Jacobian entries.
    pub jac_max_rel_err: f64,
}

/// Central-difference check of `grad_f` against `f` and `jac_c` against `c`
/// at a single point.
pub fn finite_difference_check(
    problem: &ProblemInstance,
    x: &DVector<f64>,
    h: f64,
) -> FiniteDifferenceReport {
    assert!(h > 0.0, "finite-difference step must be positive");
    let grad = (problem.grad_f)(x);
    let jac = (problem.jac_c)(x);

    let mut grad_err = 0.0f64;
    let mut jac_err = 0.0f64;
    for i in 0..problem.n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;

        let fd_g = ((problem.f)(&xp) - (problem.f)(&xm)) / (2.0 * h);
        grad_err = grad_err.max(rel_err(fd_g, grad[i]));

        let cp = (problem.c)(&xp);
        let cm = (problem.c)(&xm);
        for r in 0..problem.m {
            let fd_j = (cp[r] - cm[r]) / (2.0 * h);
            jac_err = jac_err.max(rel_err(fd_j, jac[(r, i)]));
        }
    }
    FiniteDifferenceReport {
        grad_max_rel_err: grad_err,
        jac_max_rel_err: jac_err,
    }
}

fn rel_err(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs().max(1.0)
}
