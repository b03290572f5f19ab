//! Embedded corpus of small equality-constrained test problems.
//!
//! Three canonical instances exercise the qualitatively different regimes:
//!
//! * `P1` — strictly convex QP with one linear constraint, LICQ everywhere.
//! * `P2` — duplicated constraint, so the Jacobian is rank deficient at
//!   every point while the problem itself stays feasible.
//! * `P3` — infeasible problem whose only stationary point of the
//!   infeasibility measure sits at `x = 0`, where the Jacobian vanishes.
//!
//! Seven additional randomized instances (quadratic and quartic objectives,
//! linear and nonlinear constraints) are generated from a fixed internal seed
//! with exactly controlled Jacobian rank, so the corpus is identical on every
//! platform and run.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::problem::ProblemInstance;

/// Seed of the corpus generator. Changing it changes the corpus; tests pin
/// derived values, so treat it as part of the corpus definition.
const CORPUS_SEED: u64 = 0x7a5c_3d21;

/// Returns the full embedded corpus, canonical instances first.
pub fn corpus_problems() -> Vec<Arc<ProblemInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    let mut problems = vec![p1(), p2(), p3()];
    problems.push(quadratic_linear(&mut rng, "Q1", 6, 3, 3));
    problems.push(quadratic_linear(&mut rng, "Q2", 8, 2, 2));
    problems.push(quadratic_linear(&mut rng, "Q3", 6, 4, 2));
    problems.push(quadratic_linear(&mut rng, "Q4", 5, 5, 2));
    problems.push(quartic_nonlinear(&mut rng, "R1", 4, 2, 2));
    problems.push(quartic_nonlinear(&mut rng, "R2", 5, 3, 2));
    problems.push(quartic_nonlinear(&mut rng, "R3", 7, 4, 3));
    problems
}

/// Looks a problem up by name.
pub fn find_problem(name: &str) -> Option<Arc<ProblemInstance>> {
    corpus_problems().into_iter().find(|p| p.name == name)
}

fn p1() -> Arc<ProblemInstance> {
    Arc::new(ProblemInstance::new(
        "P1",
        2,
        1,
        Box::new(|x: &DVector<f64>| 0.5 * x.norm_squared()),
        Box::new(|x: &DVector<f64>| x.clone()),
        Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0] - 1.0])),
        Box::new(|_: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
        DVector::from_vec(vec![2.0, 2.0]),
        Some(DVector::from_vec(vec![1.0, 0.0])),
        true,
        true,
    ))
}

fn p2() -> Arc<ProblemInstance> {
    Arc::new(ProblemInstance::new(
        "P2",
        2,
        2,
        Box::new(|x: &DVector<f64>| 0.5 * x.norm_squared()),
        Box::new(|x: &DVector<f64>| x.clone()),
        Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0] - 1.0, 2.0 * x[0] - 2.0])),
        Box::new(|_: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0])),
        DVector::from_vec(vec![2.0, 2.0]),
        Some(DVector::from_vec(vec![1.0, 0.0])),
        false,
        true,
    ))
}

fn p3() -> Arc<ProblemInstance> {
    Arc::new(ProblemInstance::new(
        "P3",
        1,
        1,
        Box::new(|x: &DVector<f64>| 0.5 * x[0] * x[0]),
        Box::new(|x: &DVector<f64>| x.clone()),
        Box::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0] * x[0] + 1.0])),
        Box::new(|x: &DVector<f64>| DMatrix::from_element(1, 1, 2.0 * x[0])),
        DVector::from_vec(vec![1.0]),
        None,
        false,
        false,
    ))
}

/// Quadratic objective with linear constraints of exactly the requested
/// Jacobian rank. The KKT solution is computed at construction time.
fn quadratic_linear(
    rng: &mut ChaCha8Rng,
    name: &str,
    n: usize,
    m: usize,
    rank: usize,
) -> Arc<ProblemInstance> {
    assert!(rank <= m.min(n));
    let d = DVector::from_iterator(n, (0..n).map(|_| uniform(rng, 0.5, 2.0)));
    let a_anchor = gaussian_vec(rng, n);
    let b_anchor = gaussian_vec(rng, n);

    // Full-row-rank core B (rank x n) and a mixing matrix R (m x rank) with
    // full column rank; A = R * B then has rank exactly `rank` everywhere.
    let b_core = matrix_with_rank(rng, rank, n, rank, 0.6, 1.8);
    let r_mix = if m == rank {
        DMatrix::identity(m, rank)
    } else {
        matrix_with_rank(rng, m, rank, rank, 0.6, 1.8)
    };
    let a_mat = &r_mix * &b_core;

    let known = solve_quadratic_kkt(&d, &a_anchor, &b_core, &b_anchor);
    let x0 = &b_anchor + gaussian_vec(rng, n);

    let (d_f, a_f) = (d.clone(), a_anchor.clone());
    let (d_g, a_g) = (d, a_anchor);
    let (a_c, b_c) = (a_mat.clone(), b_anchor);
    let a_j = a_mat;
    Arc::new(ProblemInstance::new(
        name,
        n,
        m,
        Box::new(move |x: &DVector<f64>| {
            let dx = x - &a_f;
            0.5 * dx.component_mul(&d_f).dot(&dx)
        }),
        Box::new(move |x: &DVector<f64>| (x - &a_g).component_mul(&d_g)),
        Box::new(move |x: &DVector<f64>| &a_c * (x - &b_c)),
        Box::new(move |_: &DVector<f64>| a_j.clone()),
        x0,
        Some(known),
        m == rank,
        true,
    ))
}

/// Quartic objective with nonlinear constraints `c(x) = R (x_head - phi(x_tail))`,
/// where `phi` is a quadratic map. The inner Jacobian carries an identity
/// block, so its rank is the requested value at every point.
fn quartic_nonlinear(
    rng: &mut ChaCha8Rng,
    name: &str,
    n: usize,
    m: usize,
    rank: usize,
) -> Arc<ProblemInstance> {
    assert!(rank <= m && rank < n);
    let tail = n - rank;
    let anchor = gaussian_vec(rng, n);
    let quartic = DVector::from_iterator(n, (0..n).map(|_| uniform(rng, 0.05, 0.2)));

    let mut s_forms = Vec::with_capacity(rank);
    let mut lin_forms = Vec::with_capacity(rank);
    for _ in 0..rank {
        let raw = gaussian_mat(rng, tail, tail);
        s_forms.push(0.25 * (&raw + raw.transpose()));
        lin_forms.push(0.5 * gaussian_vec(rng, tail));
    }
    let r_mix = if m == rank {
        DMatrix::identity(m, rank)
    } else {
        matrix_with_rank(rng, m, rank, rank, 0.6, 1.8)
    };
    let x0 = gaussian_vec(rng, n);

    let (a_f, q_f) = (anchor.clone(), quartic.clone());
    let (a_g, q_g) = (anchor, quartic);
    let (s_c, l_c, r_c) = (s_forms.clone(), lin_forms.clone(), r_mix.clone());
    let (s_j, l_j, r_j) = (s_forms, lin_forms, r_mix);
    Arc::new(ProblemInstance::new(
        name,
        n,
        m,
        Box::new(move |x: &DVector<f64>| {
            let dx = x - &a_f;
            let quad = 0.5 * dx.norm_squared();
            let quart: f64 = dx
                .iter()
                .zip(q_f.iter())
                .map(|(d, q)| 0.25 * q * d.powi(4))
                .sum();
            quad + quart
        }),
        Box::new(move |x: &DVector<f64>| {
            let dx = x - &a_g;
            DVector::from_iterator(
                dx.len(),
                dx.iter().zip(q_g.iter()).map(|(d, q)| d + q * d.powi(3)),
            )
        }),
        Box::new(move |x: &DVector<f64>| {
            let t = x.rows(s_c.len(), x.len() - s_c.len()).into_owned();
            let inner = DVector::from_iterator(
                s_c.len(),
                s_c.iter()
                    .zip(l_c.iter())
                    .enumerate()
                    .map(|(i, (s, l))| x[i] - (0.5 * t.dot(&(s * &t)) + l.dot(&t))),
            );
            &r_c * inner
        }),
        Box::new(move |x: &DVector<f64>| {
            let rank = s_j.len();
            let t = x.rows(rank, x.len() - rank).into_owned();
            let mut inner = DMatrix::zeros(rank, x.len());
            for (i, (s, l)) in s_j.iter().zip(l_j.iter()).enumerate() {
                inner[(i, i)] = 1.0;
                let dphi = s * &t + l;
                for (k, val) in dphi.iter().enumerate() {
                    inner[(i, rank + k)] = -val;
                }
            }
            &r_j * inner
        }),
        x0,
        None,
        m == rank,
        true,
    ))
}

/// Minimizer of `0.5 (x-a)^T D (x-a)` subject to `B (x-b) = 0` with `B` of
/// full row rank, through a dense solve of the KKT system.
fn solve_quadratic_kkt(
    d: &DVector<f64>,
    a: &DVector<f64>,
    b_core: &DMatrix<f64>,
    b_anchor: &DVector<f64>,
) -> DVector<f64> {
    let n = d.len();
    let r = b_core.nrows();
    let mut kkt = DMatrix::zeros(n + r, n + r);
    for i in 0..n {
        kkt[(i, i)] = d[i];
    }
    kkt.view_mut((0, n), (n, r)).copy_from(&b_core.transpose());
    kkt.view_mut((n, 0), (r, n)).copy_from(b_core);
    let mut rhs = DVector::zeros(n + r);
    rhs.rows_mut(0, n).copy_from(&d.component_mul(a));
    rhs.rows_mut(n, r).copy_from(&(b_core * b_anchor));
    let sol = kkt
        .lu()
        .solve(&rhs)
        .expect("KKT system is nonsingular by construction");
    sol.rows(0, n).into_owned()
}

/// `rows x cols` matrix with exactly `rank` nonzero singular values drawn
/// from `[smin, smax]`.
fn matrix_with_rank(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    rank: usize,
    smin: f64,
    smax: f64,
) -> DMatrix<f64> {
    let u = orthonormal_columns(rng, rows, rank);
    let v = orthonormal_columns(rng, cols, rank);
    let mut out = DMatrix::zeros(rows, cols);
    for k in 0..rank {
        let s = uniform(rng, smin, smax);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] += s * u[(i, k)] * v[(j, k)];
            }
        }
    }
    out
}

fn orthonormal_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    assert!(cols <= rows);
    let g = gaussian_mat(rng, rows, cols);
    g.qr().q()
}

fn gaussian_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    Uniform::new(lo, hi).expect("valid range").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::JacobianFactor;
    use approx::assert_relative_eq;

    #[test]
    fn corpus_has_at_least_ten_problems() {
        let corpus = corpus_problems();
        assert!(corpus.len() >= 10);
        for name in ["P1", "P2", "P3"] {
            assert!(corpus.iter().any(|p| p.name == name), "missing {name}");
        }
    }

    #[test]
    fn corpus_is_deterministic_across_calls() {
        let a = corpus_problems();
        let b = corpus_problems();
        let x = DVector::from_element(6, 0.37);
        for (pa, pb) in a.iter().zip(b.iter()) {
            assert_eq!(pa.name, pb.name);
            assert_eq!(pa.x0, pb.x0);
            if pa.n == 6 {
                assert_eq!(pa.constraints(&x).unwrap(), pb.constraints(&x).unwrap());
            }
        }
    }

    #[test]
    fn p1_values_at_feasible_point() {
        let p = find_problem("P1").unwrap();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(p.constraints(&x).unwrap(), DVector::from_vec(vec![0.0]));
        assert_eq!(p.gradient(&x).unwrap(), DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(
            p.jacobian(&x).unwrap(),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
        );
    }

    #[test]
    fn p2_jacobian_rank_is_one_everywhere() {
        let p = find_problem("P2").unwrap();
        for x in [
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![-3.0, 8.0]),
        ] {
            let f = JacobianFactor::new(&p.jacobian(&x).unwrap());
            assert_eq!(f.rank(), 1);
        }
    }

    #[test]
    fn p3_is_stationary_for_infeasibility_at_origin() {
        let p = find_problem("P3").unwrap();
        let x = DVector::from_vec(vec![0.0]);
        let c = p.constraints(&x).unwrap();
        let j = p.jacobian(&x).unwrap();
        assert_eq!(c[0], 1.0);
        assert_eq!((j.transpose() * c)[0], 0.0);
        // Analytic derivative at 0.5 for the finite-difference example.
        let j_half = p.jacobian(&DVector::from_vec(vec![0.5])).unwrap();
        assert_eq!(j_half[(0, 0)], 1.0);
    }

    #[test]
    fn generated_ranks_are_exact() {
        for p in corpus_problems() {
            let x = 0.5 * DVector::from_element(p.n, 1.0);
            let f = JacobianFactor::new(&p.jacobian(&x).unwrap());
            let expected = match p.name.as_str() {
                "P1" => 1,
                "P2" => 1,
                "P3" => 1, // J = [2x] is nonzero away from the origin
                "Q1" => 3,
                "Q2" => 2,
                "Q3" => 2,
                "Q4" => 2,
                "R1" => 2,
                "R2" => 2,
                "R3" => 3,
                other => panic!("unexpected problem {other}"),
            };
            assert_eq!(f.rank(), expected, "problem {}", p.name);
            if p.licq_everywhere {
                assert_eq!(f.rank(), p.m, "LICQ flag inconsistent for {}", p.name);
            } else if p.name != "P3" {
                assert!(
                    f.rank() < p.m,
                    "rank-deficiency flag inconsistent for {}",
                    p.name
                );
            }
        }
    }

    #[test]
    fn known_solutions_are_feasible_and_stationary() {
        for p in corpus_problems() {
            let Some(sol) = p.known_solution.as_ref() else {
                continue;
            };
            let c = p.constraints(sol).unwrap();
            assert!(
                c.norm() <= 1e-9,
                "{}: constraint violation {}",
                p.name,
                c.norm()
            );
            let grad = p.gradient(sol).unwrap();
            let j = p.jacobian(sol).unwrap();
            let factor = JacobianFactor::new(&j);
            let y = -factor.pinv_jt(&grad);
            let kkt = &grad + j.transpose() * y;
            assert!(
                kkt.norm() <= 1e-8,
                "{}: KKT residual {}",
                p.name,
                kkt.norm()
            );
        }
    }

    #[test]
    fn p1_known_multiplier() {
        let p = find_problem("P1").unwrap();
        let sol = p.known_solution.clone().unwrap();
        let grad = p.gradient(&sol).unwrap();
        let factor = JacobianFactor::new(&p.jacobian(&sol).unwrap());
        let y = -factor.pinv_jt(&grad);
        assert_relative_eq!(y[0], -1.0, epsilon = 1e-12);
    }
}
