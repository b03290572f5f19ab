//! Rank-revealing factorization of a constraint Jacobian.
//!
//! Everything the solver needs from `J` — numerical rank, an orthonormal
//! null-space basis, the orthogonal projector onto `Range(J^T)` and
//! pseudoinverse actions for minimum-norm least-squares multipliers — is
//! derived from one singular value decomposition. The decomposition is a
//! one-sided Jacobi iteration: at the dense desk scale this crate targets it
//! costs next to nothing and keeps the factorization residual at machine
//! precision even when singular values cluster, which matters because the
//! null-space split feeds invariants checked at the 1e-10 level. The
//! numerical rank uses the conventional tolerance
//! `max(m, n) * eps * sigma_max`.

use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;

/// SVD-backed factorization of an `m x n` Jacobian.
pub struct JacobianFactor {
    m: usize,
    n: usize,
    rank: usize,
    tol: f64,
    /// Singular values, descending, length `n`.
    sigma: Vec<f64>,
    /// Left singular vectors as columns, `m x n`; meaningful (and
    /// orthonormal) for columns with nonzero singular value.
    u1: DMatrix<f64>,
    /// Right singular vectors as columns, `n x n` orthogonal.
    v: DMatrix<f64>,
}

/// One-sided (Hestenes) Jacobi SVD: returns `(u, sigma, v)` with
/// `a = u * diag(sigma) * v^T`, `sigma` descending. Columns of the working
/// matrix are rotated until mutually orthogonal; their norms are the
/// singular values and the accumulated rotations form `v`.
fn one_sided_jacobi(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let max_sweeps = 60;

    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0f64;
                let mut beta = 0.0f64;
                let mut gamma = 0.0f64;
                for i in 0..m {
                    alpha += w[(i, p)] * w[(i, p)];
                    beta += w[(i, q)] * w[(i, q)];
                    gamma += w[(i, p)] * w[(i, q)];
                }
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= f64::EPSILON * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = cs * wp - sn * wq;
                    w[(i, q)] = sn * wp + cs * wq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = cs * vp - sn * vq;
                    v[(i, q)] = sn * vp + cs * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|c| w.column(c).norm()).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut sigma = Vec::with_capacity(n);
    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut v_sorted = DMatrix::<f64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        if s > 0.0 {
            for i in 0..m {
                u[(i, col)] = w[(i, src)] / s;
            }
        }
        for i in 0..n {
            v_sorted[(i, col)] = v[(i, src)];
        }
    }
    (u, sigma, v_sorted)
}

impl JacobianFactor {
    pub fn new(j: &DMatrix<f64>) -> Self {
        let (m, n) = j.shape();
        let (u1, sigma, v) = one_sided_jacobi(j);
        let sigma_max = sigma.first().copied().unwrap_or(0.0);
        let tol = m.max(n) as f64 * f64::EPSILON * sigma_max;
        let rank = sigma.iter().take_while(|&&s| s > tol && s > 0.0).count();
        Self {
            m,
            n,
            rank,
            tol,
            sigma,
            u1,
            v,
        }
    }

    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.tol
    }

    /// Smallest singular value classified as nonzero, or 0 for a zero matrix.
    pub fn smallest_nonzero_singular_value(&self) -> f64 {
        if self.rank == 0 {
            0.0
        } else {
            self.sigma[self.rank - 1]
        }
    }

    /// Orthonormal basis of `Null(J)` as columns, `n x (n - rank)`.
    pub fn null_basis(&self) -> DMatrix<f64> {
        let p = self.n - self.rank;
        let mut z = DMatrix::<f64>::zeros(self.n, p);
        for col in 0..p {
            for i in 0..self.n {
                z[(i, col)] = self.v[(i, self.rank + col)];
            }
        }
        z
    }

    /// Orthogonal projection of `w` onto `Range(J^T)`.
    pub fn project_range_jt(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for col in 0..self.rank {
            let vi = self.v.column(col);
            let coef = vi.dot(w);
            out.axpy(coef, &vi, 1.0);
        }
        out
    }

    /// Pseudoinverse action `J^+ w` for `w` in constraint space.
    pub fn pinv_j(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for col in 0..self.rank {
            let coef = self.u1.column(col).dot(w) / self.sigma[col];
            out.axpy(coef, &self.v.column(col), 1.0);
        }
        out
    }

    /// Pseudoinverse action `(J^T)^+ w` for `w` in variable space; this is the
    /// minimum-norm least-squares solution `y` of `J^T y = w`.
    pub fn pinv_jt(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for col in 0..self.rank {
            let coef = self.v.column(col).dot(w) / self.sigma[col];
            out.axpy(coef, &self.u1.column(col), 1.0);
        }
        out
    }
}

/// Solves the symmetric system `a w = rhs` through a spectral decomposition,
/// reporting the smallest eigenvalue. Fails when that eigenvalue drops below
/// `floor`, which signals loss of positive definiteness.
pub fn solve_symmetric_checked(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    floor: f64,
) -> Result<(DVector<f64>, f64), SolverError> {
    let sym = 0.5 * (a + a.transpose());
    let eig = sym.symmetric_eigen();
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !min_eig.is_finite() || min_eig < floor {
        return Err(SolverError::CurvatureFailure { min_eig });
    }
    let qt_rhs = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_iterator(
        qt_rhs.len(),
        qt_rhs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(q, l)| q / l),
    );
    Ok((&eig.eigenvectors * scaled, min_eig))
}

/// Maximum absolute entry-wise asymmetry `|a_ij - a_ji|`.
pub fn symmetry_defect(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows().min(a.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in (i + 1)..n {
            worst = worst.max((a[(i, k)] - a[(k, i)]).abs());
        }
    }
    worst
}

/// Infinity norm of a vector (0 for the empty vector).
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn factor_of_wide_rank_deficient_matrix() {
        // Rows are parallel, so the rank is 1 despite m = 2.
        let j = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 2.0, 0.0, 4.0]);
        let f = JacobianFactor::new(&j);
        assert_eq!(f.rank(), 1);
        let z = f.null_basis();
        assert_eq!(z.shape(), (3, 2));
        let jz = &j * &z;
        assert!(jz.norm() < 1e-12);
        let ztz = z.transpose() * &z;
        assert!((ztz - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn projector_splits_orthogonally() {
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let f = JacobianFactor::new(&j);
        let w = DVector::from_vec(vec![0.1, -3.0]);
        let p = f.project_range_jt(&w);
        assert_relative_eq!(p[0], 0.1, epsilon = 1e-14);
        assert_relative_eq!(p[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn pinv_jt_gives_min_norm_least_squares() {
        // Same geometry as the duplicated-constraint corpus problem.
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let f = JacobianFactor::new(&j);
        let w = DVector::from_vec(vec![-3.0, 0.0]);
        let y = f.pinv_jt(&w);
        assert_relative_eq!(y[0], -3.0 / 5.0, epsilon = 1e-12);
        assert_relative_eq!(y[1], -6.0 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let j = DMatrix::from_element(1, 1, 0.0);
        let f = JacobianFactor::new(&j);
        assert_eq!(f.rank(), 0);
        assert_eq!(f.smallest_nonzero_singular_value(), 0.0);
        assert_eq!(f.null_basis().shape(), (1, 1));
    }

    #[test]
    fn factorization_residual_stays_at_machine_precision() {
        // Random matrices with clustered spectra and exact rank deficiency;
        // the reconstruction residual and subspace orthogonality must hold
        // far below the 1e-10 level used by downstream invariants.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..200 {
            let n = rng.random_range(1..=20);
            let m = rng.random_range(1..=20);
            let rank = rng.random_range(1..=n.min(m));
            let gu: DMatrix<f64> =
                DMatrix::from_fn(m, rank, |_, _| StandardNormal.sample(&mut rng));
            let gv: DMatrix<f64> =
                DMatrix::from_fn(n, rank, |_, _| StandardNormal.sample(&mut rng));
            let (qu, qv) = (gu.qr().q(), gv.qr().q());
            let mut j: DMatrix<f64> = DMatrix::zeros(m, n);
            for k in 0..rank {
                let s: f64 = rng.random_range(0.3..3.0);
                for a in 0..m {
                    for b in 0..n {
                        j[(a, b)] += s * qu[(a, k)] * qv[(b, k)];
                    }
                }
            }
            let f = JacobianFactor::new(&j);
            assert_eq!(f.rank(), rank, "trial {trial}");
            let z = f.null_basis();
            assert!(
                (&j * &z).norm() <= 1e-13 * j.norm().max(1.0),
                "trial {trial}"
            );
            let ztz = z.transpose() * &z;
            assert!(
                (ztz - DMatrix::identity(n - rank, n - rank)).norm() <= 1e-13,
                "trial {trial}"
            );
            // Reconstruction through the pseudoinverse: J J^+ J = J.
            let mut jpj = DMatrix::<f64>::zeros(m, n);
            for col in 0..n {
                let e = DVector::from_fn(n, |i, _| if i == col { 1.0 } else { 0.0 });
                let x = f.pinv_j(&(&j * &e));
                jpj.set_column(col, &(&j * x));
            }
            assert!(
                (&jpj - &j).norm() <= 1e-12 * j.norm().max(1.0),
                "trial {trial}: reconstruction residual {}",
                (&jpj - &j).norm()
            );
        }
    }

    #[test]
    fn symmetric_solve_reports_indefiniteness() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        let err = solve_symmetric_checked(&a, &rhs, 1e-10).unwrap_err();
        match err {
            SolverError::CurvatureFailure { min_eig } => {
                assert_relative_eq!(min_eig, -1.0, epsilon = 1e-12)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
