//! Compressed-row sparse matrices and the linear solvers shared by every PDE
//! module: Jacobi/ILU(0)-preconditioned conjugate gradients, BiCGStab for the
//! non-symmetric drift systems, and a banded LU with partial pivoting.

mod csr;
mod ilu;
mod krylov;
mod lu;
mod market;

pub use csr::CsrMatrix;
pub use ilu::Ilu0;
pub use krylov::{bicgstab, conjugate_gradient, IterativeOptions, Preconditioner};
pub use lu::BandedLu;
pub use market::write_matrix_market;

use alloc::vec::Vec;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Cg,
    Lu,
    BiCgStab,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveReport {
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖`, recomputed from the returned solution.
    pub residual_norm: f64,
    pub method: SolveMethod,
}

/// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
pub fn assemble_from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<CsrMatrix> {
    CsrMatrix::from_triplets(nrows, ncols, triplets)
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// systems, relative residual `tol`.
pub fn solve_spd(m: &CsrMatrix, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, LinearSolveReport)> {
    conjugate_gradient(
        m,
        rhs,
        None,
        &IterativeOptions {
            tol,
            max_iter,
            preconditioner: Preconditioner::Jacobi,
            zero_mean_weights: None,
        },
    )
}

/// Conjugate gradients on a positive semidefinite system whose null space is
/// the constants. The right-hand side is made consistent, iterates are kept
/// at weighted mean zero.
pub fn solve_spd_zero_mean(
    m: &CsrMatrix,
    rhs: &[f64],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    conjugate_gradient(
        m,
        rhs,
        None,
        &IterativeOptions {
            tol,
            max_iter,
            preconditioner: Preconditioner::Jacobi,
            zero_mean_weights: Some(weights),
        },
    )
}

/// Direct solve by banded LU with partial pivoting.
pub fn solve_general(m: &CsrMatrix, rhs: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
    let lu = BandedLu::factor(m)?;
    lu.solve_refined(m, rhs)
}

/// Shifts `v` by a constant so that `Σ wᵢ vᵢ = 0`.
pub fn project_zero_mean(v: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out, weights);
    out
}

pub(crate) fn project_in_place(v: &mut [f64], weights: &[f64]) {
    let total: f64 = weights.iter().sum();
    let mean = v.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    /// Dense Gaussian elimination with partial pivoting, test oracle only.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap()).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn duplicates_are_summed() {
        let m = assemble_from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let m = assemble_from_triplets(2, 2, &[]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn symmetric_pair_is_detected() {
        let m = assemble_from_triplets(2, 2, &[(0, 1, 3.0), (1, 0, 3.0)]).unwrap();
        assert!(m.is_symmetric());
        let n = assemble_from_triplets(2, 2, &[(0, 1, 3.0), (1, 0, 2.0)]).unwrap();
        assert!(!n.is_symmetric());
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(matches!(
            assemble_from_triplets(2, 2, &[(2, 0, 1.0)]),
            Err(crate::Error::Assembly { row: 2, col: 0, .. })
        ));
    }

    #[test]
    fn cg_identity_and_diagonal() {
        let id = assemble_from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        let (x, _) = solve_spd(&id, &[1.0, -2.0, 3.0], 1e-12, 10).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
        let d = assemble_from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let (x, r) = solve_spd(&d, &[1.0, 2.0], 1e-12, 10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert_eq!(r.method, SolveMethod::Cg);
    }

    #[test]
    fn cg_matches_dense_oracle_on_laplacian() {
        let m = laplacian_1d(4);
        let rhs = vec![1.0; 4];
        let dense: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| m.get(i, j)).collect()).collect();
        let oracle = dense_solve(dense, rhs.clone());
        // Closed form for this system is (2, 3, 3, 2).
        assert!((oracle[0] - 2.0).abs() < 1e-12 && (oracle[1] - 3.0).abs() < 1e-12);
        let (x, rep) = solve_spd(&m, &rhs, 1e-14, 100).unwrap();
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(rep.residual_norm <= 1e-14);
    }

    #[test]
    fn cg_reports_non_convergence() {
        let m = laplacian_1d(50);
        let rhs = vec![1.0; 50];
        match solve_spd(&m, &rhs, 1e-14, 3) {
            Err(crate::Error::NonConvergence { iterations: 3, residual }) => assert!(residual > 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lu_permutation_system() {
        let m = assemble_from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let (x, rep) = solve_general(&m, &[1.0, 2.0]).unwrap();
        assert_eq!(x, vec![2.0, 1.0]);
        assert_eq!(rep.method, SolveMethod::Lu);
    }

    #[test]
    fn lu_upper_triangular_matches_back_substitution() {
        let t = [(0, 0, 2.0), (0, 1, 1.0), (0, 2, -1.0), (1, 1, 3.0), (1, 2, 2.0), (2, 2, 4.0)];
        let m = assemble_from_triplets(3, 3, &t).unwrap();
        let b = [1.0, 2.0, 8.0];
        // Back substitution oracle.
        let x2 = 8.0 / 4.0;
        let x1 = (2.0 - 2.0 * x2) / 3.0;
        let x0 = (1.0 - x1 + x2) / 2.0;
        let (x, _) = solve_general(&m, &b).unwrap();
        assert!((x[0] - x0).abs() < 1e-14 && (x[1] - x1).abs() < 1e-14 && (x[2] - x2).abs() < 1e-14);
    }

    #[test]
    fn lu_zero_row_is_singular() {
        let m = assemble_from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert!(matches!(solve_general(&m, &[1.0, 1.0]), Err(crate::Error::Singular { .. })));
    }

    #[test]
    fn lu_tie_break_prefers_smallest_row() {
        // Column 0 has equal magnitudes in rows 0 and 1: no swap must happen.
        let m = assemble_from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, -1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let lu = BandedLu::factor(&m).unwrap();
        assert_eq!(lu.pivots(), &[0, 1]);
    }

    #[test]
    fn zero_mean_projection() {
        let w = [0.5, 0.5];
        assert_eq!(project_zero_mean(&[3.0, 3.0], &w), vec![0.0, 0.0]);
        assert_eq!(project_zero_mean(&[1.0, -1.0], &w), vec![1.0, -1.0]);
        assert_eq!(project_zero_mean(&[1.0, 3.0], &w), vec![-1.0, 1.0]);
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_tridiagonal() {
        let n = 200;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i > 0 {
                t.push((i, i - 1, -1.3));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.7));
            }
        }
        let m = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| libm::sin(i as f64)).collect();
        let (xd, _) = solve_general(&m, &b).unwrap();
        for pre in [Preconditioner::Jacobi, Preconditioner::Ilu0] {
            let opts = IterativeOptions { tol: 1e-12, max_iter: 1000, preconditioner: pre, zero_mean_weights: None };
            let (x, rep) = bicgstab(&m, &b, None, &opts).unwrap();
            assert_eq!(rep.method, SolveMethod::BiCgStab);
            assert!(rep.residual_norm <= 1e-12);
            for (a, b) in x.iter().zip(&xd) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matrix_market_dump() {
        let m = assemble_from_triplets(2, 2, &[(0, 0, 1.5), (1, 0, -2.0)]).unwrap();
        let mut s = alloc::string::String::new();
        write_matrix_market(&m, &mut s).unwrap();
        assert_eq!(
            s,
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.5\n2 1 -2\n"
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn spd_system() -> impl Strategy<Value = (CsrMatrix, Vec<f64>)> {
            (2usize..40).prop_flat_map(|n| {
                (
                    proptest::collection::vec(-1.0f64..1.0, n * 3),
                    proptest::collection::vec(-1.0f64..1.0, n),
                )
                    .prop_map(move |(off, b)| {
                        // Symmetric, strictly diagonally dominant pentadiagonal matrix.
                        let mut t = Vec::new();
                        let mut diag = vec![0.5; n];
                        for i in 0..n {
                            for (k, d) in [1usize, 3].into_iter().enumerate() {
                                if i + d < n {
                                    let v = off[i * 3 + k];
                                    t.push((i, i + d, v));
                                    t.push((i + d, i, v));
                                    diag[i] += v.abs();
                                    diag[i + d] += v.abs();
                                }
                            }
                        }
                        for (i, d) in diag.into_iter().enumerate() {
                            t.push((i, i, d));
                        }
                        (CsrMatrix::from_triplets(n, n, &t).unwrap(), b)
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn cg_and_lu_agree_on_symmetric_systems((m, b) in spd_system()) {
                prop_assume!(l2(&b) > 1e-6);
                let (x_cg, r_cg) = solve_spd(&m, &b, 1e-13, 10_000).unwrap();
                let (x_lu, r_lu) = solve_general(&m, &b).unwrap();
                for (a, c) in x_cg.iter().zip(&x_lu) {
                    prop_assert!((a - c).abs() < 1e-8);
                }
                prop_assert!(r_cg.residual_norm <= 1e-13);
                prop_assert!(r_lu.residual_norm <= 1e-10);
            }

            #[test]
            fn solves_are_deterministic((m, b) in spd_system()) {
                let first = solve_spd(&m, &b, 1e-12, 10_000).unwrap();
                let second = solve_spd(&m, &b, 1e-12, 10_000).unwrap();
                prop_assert_eq!(first.0, second.0);
                prop_assert_eq!(first.1.iterations, second.1.iterations);
            }

            #[test]
            fn projection_has_zero_weighted_mean(v in proptest::collection::vec(-10.0f64..10.0, 1..20)) {
                let w = vec![1.0 / v.len() as f64; v.len()];
                let p = project_zero_mean(&v, &w);
                let mean: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
                prop_assert!(mean.abs() < 1e-12);
                let shift = v[0] - p[0];
                for (a, b) in v.iter().zip(&p) {
                    prop_assert!((a - b - shift).abs() < 1e-12);
                }
            }
        }

        fn l2(v: &[f64]) -> f64 {
            crate::math::l2_norm(v)
        }
    }
}
