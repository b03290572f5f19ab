//! Step-decomposition subproblem solvers.
//!
//! Each iteration of the solver splits the search direction into a normal
//! component `v` in `Range(J^T)` that reduces linearized infeasibility inside
//! a trust region scaled by `||J^T c||`, and a tangential component `u` in
//! `Null(J)` that reduces the objective model. The normal solve is a
//! conjugate-gradient iteration with Steihaug truncation started from zero,
//! which makes its first iterate the constrained steepest-descent (Cauchy)
//! point and therefore certifies the required fraction of Cauchy decrease by
//! construction. The tangential solve is either a null-space factorization
//! or a MINRES iteration on the saddle-point system, stopped by residual
//! thresholds proportional to the tangential stepsize.

use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;
use crate::linalg::{solve_symmetric_checked, symmetry_defect, JacobianFactor};

/// Smallest admissible eigenvalue of the reduced Hessian `Z^T H Z`.
pub const CURVATURE_FLOOR: f64 = 1e-10;

/// Relative gradient reduction at which the normal-step CG iteration stops.
const NORMAL_CG_RTOL: f64 = 1e-8;

/// Hessian model used in the tangential subproblem.
///
/// The identity always satisfies the null-space curvature requirement with
/// unit constant; a user-supplied symmetric matrix is accepted together with
/// an asserted curvature bound and is re-checked on the reduced space at
/// solve time.
#[derive(Debug, Clone)]
pub enum HessianStrategy {
    Identity,
    Supplied { matrix: DMatrix<f64>, zeta: f64 },
}

impl HessianStrategy {
    /// Wraps a user matrix, rejecting asymmetric input.
    pub fn supplied(matrix: DMatrix<f64>, zeta: f64) -> Result<Self, SolverError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(SolverError::InvalidConfig("Hessian must be square".into()));
        }
        if zeta <= 0.0 {
            return Err(SolverError::InvalidConfig("zeta must be positive".into()));
        }
        let scale = matrix.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let defect = symmetry_defect(&matrix);
        if defect > 1e-12 * scale {
            return Err(SolverError::AsymmetricHessian(defect));
        }
        Ok(Self::Supplied { matrix, zeta })
    }

    /// Asserted lower bound on `u^T H u / ||u||^2` over `Null(J)`.
    pub fn zeta(&self) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Supplied { zeta, .. } => *zeta,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Identity => x.clone(),
            Self::Supplied { matrix, .. } => matrix * x,
        }
    }

    pub fn apply_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Identity => x.clone(),
            Self::Supplied { matrix, .. } => matrix * x,
        }
    }
}

/// Output of the normal (feasibility) subproblem.
#[derive(Debug, Clone)]
pub struct NormalStepResult {
    pub v: DVector<f64>,
    /// `||c|| - ||c + J v||`.
    pub model_reduction: f64,
    /// `||c|| - ||c + alpha_c J v_c||` for the constrained Cauchy step.
    pub cauchy_reduction: f64,
    pub alpha_cauchy: f64,
    pub inner_iterations: usize,
    /// Whether the CG result was discarded for the pure Cauchy step.
    pub used_fallback: bool,
}

/// Output of the tangential (optimality) subproblem.
#[derive(Debug, Clone)]
pub struct TangentialStepResult {
    pub u: DVector<f64>,
    /// Multiplier estimate; minimum-norm least-squares in exact mode.
    pub y: DVector<f64>,
    /// Stationarity residual `H u + J^T y + (g + H v)`.
    pub rho: DVector<f64>,
    /// Feasibility residual `J u`.
    pub r: DVector<f64>,
    pub mode: TangentialMode,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TangentialMode {
    Exact,
    Iterative,
}

/// Stepsize of the constrained one-dimensional Cauchy problem
/// `min_alpha 0.5 ||c + alpha J v_c||^2  s.t.  alpha <= omega`
/// with `v_c = -J^T c`: the unconstrained minimizer
/// `||J^T c||^2 / ||J J^T c||^2` capped at `omega`.
pub fn cauchy_alpha(j: &DMatrix<f64>, c: &DVector<f64>, omega: f64) -> Result<f64, SolverError> {
    if omega <= 0.0 {
        return Err(SolverError::InvalidConfig("omega must be positive".into()));
    }
    let jtc = j.transpose() * c;
    let b = jtc.norm();
    if b == 0.0 {
        return Err(SolverError::DegenerateInput(
            "J^T c = 0: the normal trust region collapses to the origin".into(),
        ));
    }
    // min(omega, ||J^T c||^2 / ||J J^T c||^2), evaluated as a ratio of norms
    // so tiny scales cannot underflow the squares.
    let a = (j * &jtc).norm();
    if a == 0.0 {
        return Ok(omega);
    }
    let ratio = b / a;
    Ok(omega.min(ratio * ratio))
}

/// Solves the normal subproblem
/// `min_v 0.5 ||c + J v||^2  s.t.  ||v|| <= omega ||J^T c||`
/// by conjugate gradients on the normal equations with Steihaug truncation,
/// started from `v = 0`.
///
/// Starting from zero keeps every iterate inside `Range(J^T)` and makes the
/// first iterate the constrained Cauchy point, so the returned step satisfies
/// the `eps_v` fraction-of-Cauchy-decrease certificate; the certificate is
/// still evaluated explicitly and the pure Cauchy step is substituted if the
/// evaluation fails.
pub fn normal_step(
    j: &DMatrix<f64>,
    c: &DVector<f64>,
    omega: f64,
    eps_v: f64,
    max_inner: usize,
) -> Result<NormalStepResult, SolverError> {
    if omega <= 0.0 {
        return Err(SolverError::InvalidConfig("omega must be positive".into()));
    }
    if !(eps_v > 0.0 && eps_v <= 1.0) {
        return Err(SolverError::InvalidConfig(
            "eps_v must lie in (0, 1]".into(),
        ));
    }
    let n = j.ncols();
    let c_norm = c.norm();
    let jtc = j.transpose() * c;
    let jtc_norm = jtc.norm();
    if c_norm == 0.0 || jtc_norm == 0.0 {
        return Ok(NormalStepResult {
            v: DVector::zeros(n),
            model_reduction: 0.0,
            cauchy_reduction: 0.0,
            alpha_cauchy: omega,
            inner_iterations: 0,
            used_fallback: false,
        });
    }

    let radius = omega * jtc_norm;
    let alpha_c = cauchy_alpha(j, c, omega)?;
    let v_cauchy = -alpha_c * &jtc;
    let cauchy_reduction = c_norm - (c + j * &v_cauchy).norm();

    // CG on 0.5 v^T (J^T J) v + (J^T c)^T v, truncated at the trust boundary.
    // Step and restart scalars are formed from ratios of norms so that tiny
    // iterates (deep in an infeasible stationary basin) cannot underflow.
    let mut v = DVector::zeros(n);
    let mut resid = -&jtc;
    let mut p = resid.clone();
    let mut r_norm = resid.norm();
    let mut iterations = 0usize;
    let flat_tol = f64::MIN_POSITIVE.sqrt();

    for _ in 0..max_inner.max(1) {
        let jp = j * &p;
        let jp_norm = jp.norm();
        if jp_norm <= flat_tol * p.norm() {
            // Flat direction of the Gauss-Newton model: walk to the boundary.
            if p.norm() > 0.0 {
                let sigma = boundary_step(&v, &p, radius);
                v.axpy(sigma, &p, 1.0);
                iterations += 1;
            }
            break;
        }
        let alpha = (r_norm / jp_norm) * (r_norm / jp_norm);
        let candidate = &v + alpha * &p;
        if candidate.norm() >= radius {
            let sigma = boundary_step(&v, &p, radius);
            v.axpy(sigma, &p, 1.0);
            iterations += 1;
            break;
        }
        v = candidate;
        iterations += 1;
        resid.axpy(-alpha, &(j.transpose() * jp), 1.0);
        let r_next_norm = resid.norm();
        if r_next_norm <= NORMAL_CG_RTOL * jtc_norm {
            break;
        }
        let cg_beta = (r_next_norm / r_norm) * (r_next_norm / r_norm);
        p = &resid + cg_beta * p;
        r_norm = r_next_norm;
    }

    // Keep the step strictly inside the trust region under rounding.
    let v_norm = v.norm();
    if v_norm > radius {
        v *= radius * (1.0 - 1e-14) / v_norm;
    }

    let model_reduction = c_norm - (c + j * &v).norm();
    if model_reduction >= eps_v * cauchy_reduction {
        Ok(NormalStepResult {
            v,
            model_reduction,
            cauchy_reduction,
            alpha_cauchy: alpha_c,
            inner_iterations: iterations,
            used_fallback: false,
        })
    } else {
        // The pure Cauchy step certifies the condition with equality of the
        // same computed quantity on both sides.
        Ok(NormalStepResult {
            v: v_cauchy,
            model_reduction: cauchy_reduction,
            cauchy_reduction,
            alpha_cauchy: alpha_c,
            inner_iterations: iterations,
            used_fallback: true,
        })
    }
}

/// Positive root of `||v + sigma p|| = radius`, computed on radius-normalized
/// quantities so extreme trust-region scales cannot underflow the
/// discriminant.
fn boundary_step(v: &DVector<f64>, p: &DVector<f64>, radius: f64) -> f64 {
    let p_norm = p.norm();
    let w = v / radius;
    let d = p / p_norm;
    let wd = w.dot(&d);
    let disc = (wd * wd + 1.0 - w.norm_squared()).max(0.0);
    radius * (-wd + disc.sqrt()) / p_norm
}

/// Solves the tangential subproblem
/// `min_u (g + H v)^T u + 0.5 u^T H u  s.t.  J u = 0`
/// through an orthonormal null-space basis from the rank-revealing
/// factorization of `J`, returning the multiplier as the minimum-norm
/// least-squares solution and the residual pair by substitution.
pub fn exact_tangential(
    h: &HessianStrategy,
    j: &DMatrix<f64>,
    g: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<TangentialStepResult, SolverError> {
    let factor = JacobianFactor::new(j);
    exact_tangential_with(&factor, h, j, g, v)
}

/// Same as [`exact_tangential`] with a precomputed factorization of `J`.
pub fn exact_tangential_with(
    factor: &JacobianFactor,
    h: &HessianStrategy,
    j: &DMatrix<f64>,
    g: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<TangentialStepResult, SolverError> {
    let n = j.ncols();
    let rhs = g + h.apply(v);
    let z = factor.null_basis();
    let u = if z.ncols() == 0 {
        DVector::zeros(n)
    } else {
        let w = match h {
            HessianStrategy::Identity => -(z.transpose() * &rhs),
            HessianStrategy::Supplied { .. } => {
                let reduced = z.transpose() * h.apply_mat(&z);
                let (w, _) =
                    solve_symmetric_checked(&reduced, &(-(z.transpose() * &rhs)), CURVATURE_FLOOR)?;
                w
            }
        };
        &z * w
    };
    let hu = h.apply(&u);
    let y = -factor.pinv_jt(&(&rhs + &hu));
    let rho = &hu + j.transpose() * &y + &rhs;
    let r = j * &u;
    Ok(TangentialStepResult {
        u,
        y,
        rho,
        r,
        mode: TangentialMode::Exact,
        inner_iterations: 0,
    })
}

/// Residual pair of a tangential candidate `(u, y)` by substitution into the
/// saddle-point system: `rho = H u + J^T y + (g + H v)`, `r = J u`.
pub fn residual_pair(
    h: &HessianStrategy,
    j: &DMatrix<f64>,
    g: &DVector<f64>,
    v: &DVector<f64>,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let rho = h.apply(u) + j.transpose() * y + g + h.apply(v);
    let r = j * u;
    (rho, r)
}

/// Solves the tangential subproblem inexactly with MINRES on the symmetric
/// indefinite saddle-point system, accepting the first iterate whose
/// substitution residuals satisfy `||r|| <= gamma_r * beta` and
/// `||rho|| <= gamma_rho * beta`. The zero iterate is tested first. If
/// `max_inner` iterations pass without acceptance the exact solve is
/// returned instead.
#[allow(clippy::too_many_arguments)]
pub fn inexact_tangential(
    h: &HessianStrategy,
    j: &DMatrix<f64>,
    g: &DVector<f64>,
    v: &DVector<f64>,
    beta: f64,
    gamma_r: f64,
    gamma_rho: f64,
    max_inner: usize,
) -> Result<TangentialStepResult, SolverError> {
    if beta <= 0.0 || gamma_r <= 0.0 || gamma_rho <= 0.0 {
        return Err(SolverError::InvalidConfig(
            "beta, gamma_r and gamma_rho must be positive".into(),
        ));
    }
    let (m, n) = j.shape();
    let r_tol = gamma_r * beta;
    let rho_tol = gamma_rho * beta;
    let rhs = g + h.apply(v);

    let split =
        |zfull: &DVector<f64>| (zfull.rows(0, n).into_owned(), zfull.rows(n, m).into_owned());
    let accept = |u: &DVector<f64>, y: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>)> {
        let (rho, r) = residual_pair(h, j, g, v, u, y);
        (r.norm() <= r_tol && rho.norm() <= rho_tol).then_some((rho, r))
    };

    // The zero candidate: rho = g + H v, r = 0.
    let zero_u = DVector::zeros(n);
    let zero_y = DVector::zeros(m);
    if let Some((rho, r)) = accept(&zero_u, &zero_y) {
        return Ok(TangentialStepResult {
            u: zero_u,
            y: zero_y,
            rho,
            r,
            mode: TangentialMode::Iterative,
            inner_iterations: 0,
        });
    }

    let apply_a = |zfull: &DVector<f64>| -> DVector<f64> {
        let (u, y) = split(zfull);
        let top = h.apply(&u) + j.transpose() * &y;
        let bottom = j * &u;
        let mut out = DVector::zeros(n + m);
        out.rows_mut(0, n).copy_from(&top);
        out.rows_mut(n, m).copy_from(&bottom);
        out
    };
    let mut b = DVector::zeros(n + m);
    b.rows_mut(0, n).copy_from(&(-&rhs));

    // MINRES (Paige-Saunders recurrences); the residual norm estimate is
    // monotonically non-increasing, but acceptance is always decided on the
    // substitution residuals of the current iterate.
    let dim = n + m;
    let mut x = DVector::<f64>::zeros(dim);
    let beta1 = b.norm();
    if beta1 > 0.0 {
        let mut r1 = b.clone();
        let mut r2 = b.clone();
        let mut y_vec = b.clone();
        let mut oldb = 0.0f64;
        let mut lan_beta = beta1;
        let mut dbar = 0.0f64;
        let mut epsln = 0.0f64;
        let mut phibar = beta1;
        let mut cs = -1.0f64;
        let mut sn = 0.0f64;
        let mut w = DVector::<f64>::zeros(dim);
        let mut w2 = DVector::<f64>::zeros(dim);

        for iter in 1..=max_inner {
            let s = 1.0 / lan_beta;
            let v_lan = s * &y_vec;
            y_vec = apply_a(&v_lan);
            if iter >= 2 {
                y_vec.axpy(-lan_beta / oldb, &r1, 1.0);
            }
            let alfa = v_lan.dot(&y_vec);
            y_vec.axpy(-alfa / lan_beta, &r2, 1.0);
            r1 = std::mem::replace(&mut r2, y_vec.clone());
            oldb = lan_beta;
            lan_beta = y_vec.norm();
            if !lan_beta.is_finite() || !alfa.is_finite() {
                return Err(SolverError::NumericFailure(
                    "MINRES produced a non-finite Lanczos quantity".into(),
                ));
            }

            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * lan_beta;
            dbar = -cs * lan_beta;
            let gamma = (gbar * gbar + lan_beta * lan_beta)
                .sqrt()
                .max(f64::MIN_POSITIVE);
            cs = gbar / gamma;
            sn = lan_beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;

            let w1 = std::mem::replace(&mut w2, w.clone());
            w = (&v_lan - oldeps * &w1 - delta * &w2) / gamma;
            x.axpy(phi, &w, 1.0);

            if x.iter().any(|t| !t.is_finite()) {
                return Err(SolverError::NumericFailure(
                    "MINRES produced a non-finite iterate".into(),
                ));
            }

            let (u, y) = split(&x);
            if let Some((rho, r)) = accept(&u, &y) {
                return Ok(TangentialStepResult {
                    u,
                    y,
                    rho,
                    r,
                    mode: TangentialMode::Iterative,
                    inner_iterations: iter,
                });
            }
            if lan_beta <= f64::EPSILON * beta1 {
                // Krylov space exhausted.
                break;
            }
        }
    }

    // Safety valve: the exact solve.
    exact_tangential(h, j, g, v)
}

/// Splits `u` into its `Range(J^T)` part `u1` and `Null(J)` part `u2` through
/// the rank-revealing factorization, so `u1 + u2 = u` exactly.
pub fn range_null_split(j: &DMatrix<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let factor = JacobianFactor::new(j);
    let u1 = factor.project_range_jt(u);
    let u2 = u - &u1;
    (u1, u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn identity2() -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    #[test]
    fn cauchy_alpha_caps_at_omega() {
        let c = DVector::from_vec(vec![3.0, 4.0]);
        let a = cauchy_alpha(&identity2(), &c, 0.5).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-15);
        let a = cauchy_alpha(&identity2(), &c, 2.0).unwrap();
        assert_relative_eq!(a, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cauchy_alpha_rank_deficient_geometry() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let c = DVector::from_vec(vec![1.0, 2.0]);
        let a = cauchy_alpha(&j, &c, 10.0).unwrap();
        assert_relative_eq!(a, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn cauchy_alpha_rejects_vanishing_gradient() {
        let j = DMatrix::from_element(1, 1, 0.0);
        let c = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            cauchy_alpha(&j, &c, 1.0),
            Err(SolverError::DegenerateInput(_))
        ));
    }

    #[test]
    fn normal_step_zero_constraint() {
        let c = DVector::from_vec(vec![0.0, 0.0]);
        let res = normal_step(&identity2(), &c, 1.0, 0.5, 20).unwrap();
        assert_eq!(res.v, DVector::zeros(2));
        assert_eq!(res.model_reduction, 0.0);
        assert_eq!(res.cauchy_reduction, 0.0);
    }

    #[test]
    fn normal_step_reaches_linearized_feasibility() {
        let c = DVector::from_vec(vec![1.0, 0.0]);
        let res = normal_step(&identity2(), &c, 1.0, 0.5, 20).unwrap();
        assert_relative_eq!(res.v[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(res.v[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(res.model_reduction, 1.0, epsilon = 1e-12);
        assert!(res.model_reduction >= 0.5 * res.cauchy_reduction);
    }

    #[test]
    fn normal_step_vanishing_gradient_returns_zero() {
        // The infeasible stationary point: J = 0, c = 1.
        let j = DMatrix::from_element(1, 1, 0.0);
        let c = DVector::from_vec(vec![1.0]);
        let res = normal_step(&j, &c, 1.0, 0.9, 10).unwrap();
        assert_eq!(res.v, DVector::zeros(1));
        assert_eq!(res.model_reduction, 0.0);
    }

    #[test]
    fn normal_step_respects_trust_region_on_random_instances() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = 1 + (trial % 7);
            let m = 1 + (trial % 5);
            let j = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
            let c = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            let omega = 0.1 + (trial % 13) as f64 * 0.3;
            let eps_v = 0.1 + 0.85 * ((trial % 9) as f64 / 9.0);
            let res = normal_step(&j, &c, omega, eps_v, 4 * n).unwrap();
            let jtc_norm = (j.transpose() * &c).norm();
            assert!(
                res.v.norm() <= omega * jtc_norm * (1.0 + 1e-12),
                "trial {trial}"
            );
            assert!(
                res.model_reduction >= eps_v * res.cauchy_reduction - 1e-12,
                "trial {trial}: {} vs {}",
                res.model_reduction,
                eps_v * res.cauchy_reduction
            );
            let factor = JacobianFactor::new(&j);
            let off_range = &res.v - factor.project_range_jt(&res.v);
            assert!(
                off_range.norm() <= 1e-10 * res.v.norm().max(1.0),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn exact_tangential_simple_geometry() {
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = DVector::from_vec(vec![2.0, 3.0]);
        let v = DVector::zeros(2);
        let res = exact_tangential(&HessianStrategy::Identity, &j, &g, &v).unwrap();
        assert_relative_eq!(res.u[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(res.u[1], -3.0, epsilon = 1e-12);
        assert_relative_eq!(res.y[0], -2.0, epsilon = 1e-12);
        assert!(res.rho.norm() <= 1e-12);
        assert!(res.r.norm() <= 1e-12);
    }

    #[test]
    fn exact_tangential_trivial_null_space() {
        let j = identity2();
        let g = DVector::from_vec(vec![5.0, -1.0]);
        let v = DVector::zeros(2);
        let res = exact_tangential(&HessianStrategy::Identity, &j, &g, &v).unwrap();
        assert_eq!(res.u, DVector::zeros(2));
    }

    #[test]
    fn exact_tangential_duplicated_constraint_multiplier() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let (a, b) = (3.0, 4.0);
        let g = DVector::from_vec(vec![a, b]);
        let v = DVector::zeros(2);
        let res = exact_tangential(&HessianStrategy::Identity, &j, &g, &v).unwrap();
        assert_relative_eq!(res.u[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(res.u[1], -b, epsilon = 1e-12);
        assert_relative_eq!(res.y[0], -a / 5.0, epsilon = 1e-12);
        assert_relative_eq!(res.y[1], -2.0 * a / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_tangential_detects_indefinite_reduced_hessian() {
        let h =
            HessianStrategy::supplied(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), 1.0)
                .unwrap();
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = DVector::from_vec(vec![1.0, 1.0]);
        let err = exact_tangential(&h, &j, &g, &DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, SolverError::CurvatureFailure { .. }));
    }

    #[test]
    fn residual_pair_by_substitution() {
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = DVector::from_vec(vec![2.0, 3.0]);
        let v = DVector::zeros(2);
        let u = DVector::from_vec(vec![0.1, -3.0]);
        let y = DVector::from_vec(vec![-2.0]);
        let (rho, r) = residual_pair(&HessianStrategy::Identity, &j, &g, &v, &u, &y);
        assert_relative_eq!(rho[0], 0.1, epsilon = 1e-15);
        assert_relative_eq!(rho[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r[0], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn loose_tolerances_accept_zero_iterate() {
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = DVector::from_vec(vec![2.0, 3.0]);
        let v = DVector::zeros(2);
        let res =
            inexact_tangential(&HessianStrategy::Identity, &j, &g, &v, 1.0, 1e6, 1e6, 3).unwrap();
        assert_eq!(res.inner_iterations, 0);
        assert_eq!(res.u, DVector::zeros(2));
        assert_eq!(res.mode, TangentialMode::Iterative);
    }

    #[test]
    fn tight_budget_matches_exact_solve() {
        let j = DMatrix::from_row_slice(2, 4, &[1.0, 0.5, 0.0, -1.0, 0.2, 0.0, 1.0, 0.3]);
        let g = DVector::from_vec(vec![0.7, -1.2, 0.4, 2.0]);
        let v = DVector::from_vec(vec![0.1, 0.0, -0.2, 0.05]);
        let exact = exact_tangential(&HessianStrategy::Identity, &j, &g, &v).unwrap();
        let inexact =
            inexact_tangential(&HessianStrategy::Identity, &j, &g, &v, 1e-12, 1.0, 1.0, 6).unwrap();
        assert!((&inexact.u - &exact.u).norm() <= 1e-8);
    }

    #[test]
    fn minres_accepts_with_bounds_satisfied() {
        let j = DMatrix::from_row_slice(2, 4, &[1.0, 0.5, 0.0, -1.0, 0.2, 0.0, 1.0, 0.3]);
        let g = DVector::from_vec(vec![0.7, -1.2, 0.4, 2.0]);
        let v = DVector::from_vec(vec![0.1, 0.0, -0.2, 0.05]);
        let beta = 0.05;
        let (gamma_r, gamma_rho) = (0.5, 0.5);
        let res = inexact_tangential(
            &HessianStrategy::Identity,
            &j,
            &g,
            &v,
            beta,
            gamma_r,
            gamma_rho,
            6,
        )
        .unwrap();
        assert_eq!(res.mode, TangentialMode::Iterative);
        assert!(res.inner_iterations >= 1);
        assert!(res.r.norm() <= gamma_r * beta);
        assert!(res.rho.norm() <= gamma_rho * beta);
        // The stored pair reproduces the substitution identity.
        let (rho, r) = residual_pair(&HessianStrategy::Identity, &j, &g, &v, &res.u, &res.y);
        assert!((rho - &res.rho).norm() <= 1e-12);
        assert!((r - &res.r).norm() <= 1e-12);
    }

    #[test]
    fn range_null_split_examples() {
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let u = DVector::from_vec(vec![0.1, -3.0]);
        let (u1, u2) = range_null_split(&j, &u);
        assert_relative_eq!(u1[0], 0.1, epsilon = 1e-14);
        assert_relative_eq!(u1[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(u2[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(u2[1], -3.0, epsilon = 1e-14);

        let (z1, z2) = range_null_split(&j, &DVector::zeros(2));
        assert_eq!(z1, DVector::zeros(2));
        assert_eq!(z2, DVector::zeros(2));

        let j0 = DMatrix::from_element(1, 1, 0.0);
        let w = DVector::from_vec(vec![4.0]);
        let (w1, w2) = range_null_split(&j0, &w);
        assert_eq!(w1, DVector::zeros(1));
        assert_eq!(w2, w);
    }
}
