//! Periodic unit-cell problems: correctors `χ₁, χ₂, χ₀` and the homogenized
//! coefficients built from them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{self, LocalCoeffs, QuadPoint, Topology, GAUSS_POINTS};
use crate::fields::{validate_hypotheses, CoefficientField, FieldKind, Structure};
use crate::linalg::{self, conjugate_gradient, CsrMatrix, IterativeOptions, LinearSolveReport, Preconditioner};
use crate::math::{floor, inverse, sym_eigenvalues, Mat2, Vec2};

/// Uniform `n x n` grid on the unit cell with periodic identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::config(alloc::format!(
                "periodic grid needs an even n >= 4, got {n}"
            )));
        }
        Ok(PeriodicGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    /// Node index with wrap-around in both directions.
    #[inline]
    pub fn node(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize
    }

    pub fn coord(&self, i: usize, j: usize) -> Vec2 {
        [i as f64 * self.h(), j as f64 * self.h()]
    }

    pub fn topology(&self) -> Topology {
        Topology::Periodic { n: self.n }
    }

    /// Nodal quadrature weights; they sum to the cell measure 1.
    pub fn weights(&self) -> Vec<f64> {
        alloc::vec![self.h() * self.h(); self.node_count()]
    }

    /// Bilinear interpolation of a nodal field at any `y`, extended periodically.
    pub fn interpolate(&self, values: &[f64], y: Vec2) -> f64 {
        let n = self.n as f64;
        let sx = y[0] * n;
        let sy = y[1] * n;
        let fx = floor(sx);
        let fy = floor(sy);
        let (tx, ty) = (sx - fx, sy - fy);
        let (i, j) = (fx as isize, fy as isize);
        let v00 = values[self.node(i, j)];
        let v10 = values[self.node(i + 1, j)];
        let v01 = values[self.node(i, j + 1)];
        let v11 = values[self.node(i + 1, j + 1)];
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    /// Gradient of the bilinear interpolant at `y` (one-sided on element edges).
    pub fn interpolate_gradient(&self, values: &[f64], y: Vec2) -> Vec2 {
        let n = self.n as f64;
        let sx = y[0] * n;
        let sy = y[1] * n;
        let fx = floor(sx);
        let fy = floor(sy);
        let (tx, ty) = (sx - fx, sy - fy);
        let (i, j) = (fx as isize, fy as isize);
        let v00 = values[self.node(i, j)];
        let v10 = values[self.node(i + 1, j)];
        let v01 = values[self.node(i, j + 1)];
        let v11 = values[self.node(i + 1, j + 1)];
        [
            n * ((1.0 - ty) * (v10 - v00) + ty * (v11 - v01)),
            n * ((1.0 - tx) * (v01 - v00) + tx * (v11 - v10)),
        ]
    }

    /// Gradients at the Gauss points, indexed `(ej n + ei) * 4 + q`.
    pub fn quadrature_gradients(&self, values: &[f64]) -> Vec<Vec2> {
        let n = self.n;
        let h = self.h();
        let mut out = Vec::with_capacity(4 * n * n);
        for ej in 0..n {
            for ei in 0..n {
                let (i, j) = (ei as isize, ej as isize);
                let vals = [
                    values[self.node(i, j)],
                    values[self.node(i + 1, j)],
                    values[self.node(i, j + 1)],
                    values[self.node(i + 1, j + 1)],
                ];
                out.extend_from_slice(&fem::element_gradients(vals, h));
            }
        }
        out
    }

    /// Gauss-quadrature cell average of `f(element, q, y)`.
    pub(crate) fn average(&self, mut f: impl FnMut(usize, Vec2) -> f64) -> f64 {
        let n = self.n;
        let h = self.h();
        let mut total = 0.0;
        for ej in 0..n {
            for ei in 0..n {
                let e = ej * n + ei;
                for (q, g) in GAUSS_POINTS.iter().enumerate() {
                    let y = [(ei as f64 + g[0]) * h, (ej as f64 + g[1]) * h];
                    total += f(4 * e + q, y);
                }
            }
        }
        total * 0.25 * h * h
    }
}

/// Options for the periodic cell solves.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOptions {
    /// Relative residual target of the conjugate-gradient solve.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional starting iterate; it is projected to mean zero first.
    pub initial_guess: Option<Vec<f64>>,
    /// Lattice resolution for the hypothesis check on `A`.
    pub hypothesis_lattice: usize,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            tol: 1e-11,
            max_iter: 50_000,
            initial_guess: None,
            hypothesis_lattice: 16,
        }
    }
}

fn require_cell_field(field: &CoefficientField, kind: FieldKind, name: &str) -> Result<()> {
    field.expect_kind(kind)?;
    match field.structure() {
        Structure::Constant | Structure::Periodic => Ok(()),
        s => Err(Error::config(alloc::format!(
            "{name}: cell problems need a constant or period-1 field, got {s:?}; pass its periodic part"
        ))),
    }
}

/// Periodic Q1 stiffness `∫_Y A∇u·∇v` with `A` at the 2x2 Gauss points.
pub fn assemble_cell_stiffness(a: &CoefficientField, grid: &PeriodicGrid) -> Result<CsrMatrix> {
    assemble_checked(a, grid, CellOptions::default().hypothesis_lattice)
}

fn assemble_checked(a: &CoefficientField, grid: &PeriodicGrid, lattice: usize) -> Result<CsrMatrix> {
    require_cell_field(a, FieldKind::Matrix, "A")?;
    validate_hypotheses(a, lattice, 8)?;
    fem::assemble_operator(&grid.topology(), |p: &QuadPoint| LocalCoeffs::diffusion(a.mat(p.x)))
}

fn solve_zero_mean(k: &CsrMatrix, rhs: &[f64], grid: &PeriodicGrid, opts: &CellOptions) -> Result<(Vec<f64>, LinearSolveReport)> {
    let weights = grid.weights();
    let x0 = opts.initial_guess.as_ref().map(|g| linalg::project_zero_mean(g, &weights));
    if let Some(x0) = &x0 {
        if x0.len() != grid.node_count() {
            return Err(Error::config("initial guess has the wrong length"));
        }
    }
    conjugate_gradient(
        k,
        rhs,
        x0.as_deref(),
        &IterativeOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            preconditioner: Preconditioner::Jacobi,
            zero_mean_weights: Some(&weights),
        },
    )
}

fn flux_rhs(h_field: &CoefficientField, grid: &PeriodicGrid) -> Result<Vec<f64>> {
    require_cell_field(h_field, FieldKind::Vector, "H")?;
    Ok(fem::assemble_flux_load(&grid.topology(), |p| h_field.vec(p.x)))
}

/// Zero-mean periodic solution of `-div(A∇u) = div H`.
pub fn solve_cell_general(a: &CoefficientField, h_field: &CoefficientField, grid: &PeriodicGrid) -> Result<Vec<f64>> {
    solve_cell_general_with(a, h_field, grid, &CellOptions::default()).map(|(u, _)| u)
}

pub fn solve_cell_general_with(
    a: &CoefficientField,
    h_field: &CoefficientField,
    grid: &PeriodicGrid,
    opts: &CellOptions,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let k = assemble_checked(a, grid, opts.hypothesis_lattice)?;
    let rhs = flux_rhs(h_field, grid)?;
    solve_zero_mean(&k, &rhs, grid, opts)
}

/// Periodic solution of `-div(A∇u) + T⁻² u = div H`. The system is
/// positive definite, so no normalization is imposed.
pub fn solve_cell_regularized(
    a: &CoefficientField,
    h_field: &CoefficientField,
    grid: &PeriodicGrid,
    t: f64,
) -> Result<Vec<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::config("regularization parameter T must be positive and finite"));
    }
    require_cell_field(a, FieldKind::Matrix, "A")?;
    validate_hypotheses(a, CellOptions::default().hypothesis_lattice, 8)?;
    let shift = 1.0 / (t * t);
    let k = fem::assemble_operator(&grid.topology(), |p| LocalCoeffs {
        a: a.mat(p.x),
        v: [0.0, 0.0],
        b: [0.0, 0.0],
        c: shift,
    })?;
    let rhs = flux_rhs(h_field, grid)?;
    let opts = CellOptions::default();
    linalg::solve_spd(&k, &rhs, opts.tol, opts.max_iter).map(|(u, _)| u)
}

/// Correctors of one periodic medium.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    grid: PeriodicGrid,
    chi: [Vec<f64>; 2],
    chi0: Vec<f64>,
    grad_chi: [Vec<Vec2>; 2],
    grad_chi0: Vec<Vec2>,
    a: CoefficientField,
    v: CoefficientField,
    reports: [LinearSolveReport; 3],
}

impl CellSolution {
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// `χ_j`, `j ∈ {0, 1}` for the directions `e₁, e₂`.
    pub fn chi(&self, j: usize) -> &[f64] {
        &self.chi[j]
    }

    pub fn chi0(&self) -> &[f64] {
        &self.chi0
    }

    /// `∇χ_j` at the Gauss points, indexed `(ej n + ei) * 4 + q`.
    pub fn grad_chi(&self, j: usize) -> &[Vec2] {
        &self.grad_chi[j]
    }

    pub fn grad_chi0(&self) -> &[Vec2] {
        &self.grad_chi0
    }

    pub fn reports(&self) -> &[LinearSolveReport; 3] {
        &self.reports
    }

    /// The `A` and `V` the correctors were computed for.
    pub fn coefficients(&self) -> (&CoefficientField, &CoefficientField) {
        (&self.a, &self.v)
    }

    /// Observed `max_j ‖χ_j‖_∞`, the constant bounding the correctors.
    pub fn sup_bound(&self) -> f64 {
        self.chi
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn chi0_sup(&self) -> f64 {
        self.chi0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Discrete means of `χ₁, χ₂, χ₀`.
    pub fn means(&self) -> [f64; 3] {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        [mean(&self.chi[0]), mean(&self.chi[1]), mean(&self.chi0)]
    }

    /// Largest component of the cell average of `∇χ₁, ∇χ₂, ∇χ₀`.
    pub fn max_gradient_mean(&self) -> f64 {
        let mut worst = 0.0f64;
        for g in [&self.grad_chi[0], &self.grad_chi[1], &self.grad_chi0] {
            for k in 0..2 {
                let m = g.iter().map(|v| v[k]).sum::<f64>() / g.len() as f64;
                worst = worst.max(m.abs());
            }
        }
        worst
    }

    /// `χ(y) = (χ₁(y), χ₂(y))` by periodic bilinear interpolation.
    pub fn chi_at(&self, y: Vec2) -> Vec2 {
        [self.grid.interpolate(&self.chi[0], y), self.grid.interpolate(&self.chi[1], y)]
    }

    pub fn chi0_at(&self, y: Vec2) -> f64 {
        self.grid.interpolate(&self.chi0, y)
    }
}

/// `χ_j` from `-div(A(e_j + ∇χ_j)) = 0` and `χ₀` from `-div(A∇χ₀ + V) = 0`.
pub fn solve_correctors(a: &CoefficientField, v: &CoefficientField, grid: &PeriodicGrid) -> Result<CellSolution> {
    solve_correctors_with(a, v, grid, &CellOptions::default())
}

pub fn solve_correctors_with(
    a: &CoefficientField,
    v: &CoefficientField,
    grid: &PeriodicGrid,
    opts: &CellOptions,
) -> Result<CellSolution> {
    require_cell_field(v, FieldKind::Vector, "V")?;
    let k = assemble_checked(a, grid, opts.hypothesis_lattice)?;
    let solve = |h: &CoefficientField| -> Result<(Vec<f64>, LinearSolveReport)> {
        let rhs = flux_rhs(h, grid)?;
        solve_zero_mean(&k, &rhs, grid, opts)
    };
    let (chi1, r1) = solve(&a.column(0)?)?;
    let (chi2, r2) = solve(&a.column(1)?)?;
    let (chi0, r0) = solve(v)?;
    Ok(CellSolution {
        grid: *grid,
        grad_chi: [grid.quadrature_gradients(&chi1), grid.quadrature_gradients(&chi2)],
        grad_chi0: grid.quadrature_gradients(&chi0),
        chi: [chi1, chi2],
        chi0,
        a: a.clone(),
        v: v.clone(),
        reports: [r1, r2, r0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizedCoefficients {
    pub a_hat: Mat2,
    pub b_hat: Vec2,
    pub v_hat: Vec2,
    pub a0_hat: f64,
    pub mu: f64,
}

impl HomogenizedCoefficients {
    /// Constant coefficients, unchanged by homogenization.
    pub fn constant(a: Mat2, v: Vec2, b: Vec2, a0: f64, mu: f64) -> Self {
        HomogenizedCoefficients {
            a_hat: a,
            b_hat: b,
            v_hat: v,
            a0_hat: a0,
            mu,
        }
    }

    pub fn asymmetry(&self) -> f64 {
        (self.a_hat[0][1] - self.a_hat[1][0]).abs()
    }

    /// Ascending eigenvalues of the symmetric part of `Â`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        sym_eigenvalues(&self.a_hat)
    }

    /// Checks symmetry within `1e-8` and `spec(Â) ⊂ [α - tol, β + tol]`.
    pub fn check(&self, alpha: f64, beta: f64, tol: f64) -> Result<()> {
        if self.asymmetry() > 1e-8 {
            return Err(Error::hypothesis(
                alloc::format!("homogenized matrix is not symmetric (|a12 - a21| = {:.3e})", self.asymmetry()),
                None,
            ));
        }
        let (lo, hi) = self.eigenvalues();
        if lo < alpha - tol || hi > beta + tol {
            return Err(Error::hypothesis(
                alloc::format!("homogenized eigenvalues [{lo}, {hi}] leave [{alpha}, {beta}]"),
                None,
            ));
        }
        Ok(())
    }
}

/// `Â = ⟨A(I + ∇χ)⟩`, `B̂ = ⟨B(I + ∇χ)⟩`, `V̂ = ⟨A∇χ₀ + V⟩`, `â₀ = ⟨B·∇χ₀ + a₀⟩`
/// by the same Gauss rule used in assembly; `μ` passes through.
pub fn homogenized_coefficients(
    a: &CoefficientField,
    v: &CoefficientField,
    b: &CoefficientField,
    a0: &CoefficientField,
    mu: f64,
    sol: &CellSolution,
) -> Result<HomogenizedCoefficients> {
    if *a != sol.a || *v != sol.v {
        return Err(Error::config("cell solution was computed for different A or V coefficients"));
    }
    require_cell_field(b, FieldKind::Vector, "B")?;
    require_cell_field(a0, FieldKind::Scalar, "a0")?;
    let grid = &sol.grid;
    let (g1, g2, g0) = (&sol.grad_chi[0], &sol.grad_chi[1], &sol.grad_chi0);

    let mut a_hat = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let gj = if j == 0 { g1 } else { g2 };
            a_hat[i][j] = grid.average(|k, y| {
                let m = a.mat(y);
                m[i][j] + m[i][0] * gj[k][0] + m[i][1] * gj[k][1]
            });
        }
    }
    let mut b_hat = [0.0; 2];
    for (j, bj) in b_hat.iter_mut().enumerate() {
        let gj = if j == 0 { g1 } else { g2 };
        *bj = grid.average(|k, y| {
            let bv = b.vec(y);
            bv[j] + bv[0] * gj[k][0] + bv[1] * gj[k][1]
        });
    }
    let mut v_hat = [0.0; 2];
    for (i, vi) in v_hat.iter_mut().enumerate() {
        *vi = grid.average(|k, y| {
            let m = a.mat(y);
            m[i][0] * g0[k][0] + m[i][1] * g0[k][1] + v.vec(y)[i]
        });
    }
    let a0_hat = grid.average(|k, y| {
        let bv = b.vec(y);
        bv[0] * g0[k][0] + bv[1] * g0[k][1] + a0.scal(y)
    });
    Ok(HomogenizedCoefficients {
        a_hat,
        b_hat,
        v_hat,
        a0_hat,
        mu,
    })
}

/// Arithmetic (Voigt) and harmonic (Reuss) cell averages `⟨A⟩` and `⟨A⁻¹⟩⁻¹`.
pub fn voigt_reuss(a: &CoefficientField, grid: &PeriodicGrid) -> Result<(Mat2, Mat2)> {
    require_cell_field(a, FieldKind::Matrix, "A")?;
    let mut voigt = [[0.0; 2]; 2];
    let mut inv_mean = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            voigt[i][j] = grid.average(|_, y| a.mat(y)[i][j]);
            inv_mean[i][j] = grid.average(|_, y| inverse(&a.mat(y)).map_or(f64::NAN, |m| m[i][j]));
        }
    }
    let reuss = inverse(&inv_mean).ok_or_else(|| Error::config("harmonic average of A is singular"))?;
    Ok((voigt, reuss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{self as catalog, Basis, Expr, TrigTerm};
    use crate::math::{dot, mat_vec, sqrt, TAU};

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn grid_requires_even_n_at_least_four() {
        assert!(PeriodicGrid::new(2).is_err());
        assert!(PeriodicGrid::new(7).is_err());
        assert!(PeriodicGrid::new(4).is_ok());
        let g = grid(4);
        assert_eq!(g.node(-1, 0), 3);
        assert_eq!(g.node(4, 5), 4);
    }

    #[test]
    fn identity_stiffness_is_the_q1_stencil() {
        let g = grid(4);
        let k = assemble_cell_stiffness(&CoefficientField::identity(), &g).unwrap();
        // Stencil oracle: centre 8/3, all eight neighbours -1/3.
        for j in 0..4isize {
            for i in 0..4isize {
                let row = g.node(i, j);
                let mut expected = alloc::vec![0.0; 16];
                for dj in -1..=1 {
                    for di in -1..=1 {
                        expected[g.node(i + di, j + dj)] += if di == 0 && dj == 0 { 8.0 / 3.0 } else { -1.0 / 3.0 };
                    }
                }
                for col in 0..16 {
                    assert!(close(k.get(row, col), expected[col], 1e-14), "({row},{col})");
                }
            }
        }
        assert!(k.is_symmetric());
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let k = assemble_cell_stiffness(&catalog::checkerboard(), &grid(8)).unwrap();
        let s = k.mul_vec(&alloc::vec![1.0; 64]);
        assert!(s.iter().all(|x| x.abs() < 1e-13));
        assert!(k.is_symmetric());
    }

    #[test]
    fn zero_flux_gives_zero_solution() {
        let u = solve_cell_general(&catalog::laminate(), &CoefficientField::zero_vector(), &grid(8)).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_mode_matches_fourier_oracle() {
        // H = (-2π cos 2πy₁, 0): Δu = 2π·2π sin... => u = sin(2πy₁)/(2π)·(-1)·(-1).
        // With A = I: -Δu = div H = 4π² sin 2πy₁, so u = sin(2πy₁).
        let h = CoefficientField::vector(
            Structure::Periodic,
            [
                Expr::from_terms(alloc::vec![TrigTerm::new(-TAU, [1.0, 0.0], [Basis::Cos, Basis::Cos])]),
                Expr::zero(),
            ],
            TAU,
        )
        .unwrap();
        let g = grid(64);
        let u = solve_cell_general(&CoefficientField::identity(), &h, &g).unwrap();
        let err = (0..64)
            .flat_map(|j| (0..64).map(move |i| (i, j)))
            .map(|(i, j)| (u[g.node(i as isize, j as isize)] - crate::math::sin(TAU * g.coord(i, j)[0])).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "max nodal error {err}");
    }

    fn laminate_oracle_derivative(y1: f64) -> f64 {
        // ∂χ₁/∂y₁ = ĥ / a(y₁) - 1 with ĥ = √3.
        sqrt(3.0) / (2.0 + crate::math::cos(TAU * y1)) - 1.0
    }

    #[test]
    fn laminate_corrector_matches_closed_form() {
        let g = grid(128);
        let a = catalog::laminate();
        let u = solve_cell_general(&a, &a.column(0).unwrap(), &g).unwrap();
        let grads = g.quadrature_gradients(&u);
        // Q1 gradients are constant in y₁ on each element, so compare with the
        // element average of the exact derivative (Simpson, 16 panels).
        let mut worst = 0.0f64;
        for ei in 0..128 {
            let x0 = ei as f64 * g.h();
            let avg = (0..=16)
                .map(|k| {
                    let w = if k == 0 || k == 16 { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    w * laminate_oracle_derivative(x0 + k as f64 * g.h() / 16.0)
                })
                .sum::<f64>()
                / 48.0;
            for ej in 0..128 {
                for q in 0..4 {
                    let gq = grads[(ej * 128 + ei) * 4 + q];
                    worst = worst.max((gq[0] - avg).abs()).max(gq[1].abs());
                }
            }
        }
        assert!(worst < 1e-3, "gradient error {worst}");
    }

    #[test]
    fn regularized_solution_approaches_the_corrector() {
        let g = grid(32);
        let a = catalog::laminate();
        let h = a.column(0).unwrap();
        let chi = g.quadrature_gradients(&solve_cell_general(&a, &h, &g).unwrap());
        let norm = |v: &[Vec2]| sqrt(v.iter().map(|x| dot(*x, *x)).sum::<f64>() / v.len() as f64);
        let diff = |t: f64| {
            let ut = g.quadrature_gradients(&solve_cell_regularized(&a, &h, &g, t).unwrap());
            let d: Vec<Vec2> = ut.iter().zip(&chi).map(|(x, y)| [x[0] - y[0], x[1] - y[1]]).collect();
            norm(&d)
        };
        assert!(diff(1e3) <= 1e-3 * norm(&chi));
        let mut prev = f64::INFINITY;
        for t in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let d = diff(t);
            assert!(d <= prev * (1.0 + 1e-12));
            prev = d;
        }
        let zero = solve_cell_regularized(&a, &CoefficientField::zero_vector(), &g, 3.0).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        assert!(solve_cell_regularized(&a, &h, &g, 0.0).is_err());
    }

    #[test]
    fn identity_has_no_correctors() {
        let sol = solve_correctors(&CoefficientField::identity(), &CoefficientField::zero_vector(), &grid(16)).unwrap();
        assert!(sol.chi(0).iter().chain(sol.chi(1)).chain(sol.chi0()).all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn chi0_equals_chi1_when_v_is_first_column() {
        let a = catalog::checkerboard();
        let v = a.column(0).unwrap();
        let sol = solve_correctors(&a, &v, &grid(32)).unwrap();
        for (x, y) in sol.chi0().iter().zip(sol.chi(0)) {
            assert!((x - y).abs() <= 1e-12);
        }
        assert!(sol.means().iter().all(|m| m.abs() < 1e-13));
        assert!(sol.max_gradient_mean() < 1e-10);
    }

    #[test]
    fn constant_coefficients_pass_through() {
        let sol = solve_correctors(&CoefficientField::identity(), &CoefficientField::zero_vector(), &grid(8)).unwrap();
        let hc = homogenized_coefficients(
            &CoefficientField::identity(),
            &CoefficientField::zero_vector(),
            &CoefficientField::zero_vector(),
            &CoefficientField::constant_scalar(0.7),
            1.5,
            &sol,
        )
        .unwrap();
        let flat = [hc.a_hat[0][0] - 1.0, hc.a_hat[0][1], hc.a_hat[1][0], hc.a_hat[1][1] - 1.0];
        assert!(flat.iter().chain(&hc.b_hat).chain(&hc.v_hat).all(|x| x.abs() < 1e-14));
        assert!(close(hc.a0_hat, 0.7, 1e-13));
        assert_eq!(hc.mu, 1.5);
    }

    #[test]
    fn laminate_homogenizes_to_harmonic_and_arithmetic_means() {
        let a = catalog::laminate();
        let zero = CoefficientField::zero_vector();
        let sol = solve_correctors(&a, &zero, &grid(256)).unwrap();
        let hc = homogenized_coefficients(&a, &zero, &zero, &CoefficientField::zero_scalar(), 0.0, &sol).unwrap();
        assert!(close(hc.a_hat[0][0], sqrt(3.0), 1e-3), "{:?}", hc.a_hat);
        assert!(close(hc.a_hat[1][1], 2.0, 1e-3));
        assert!(hc.a_hat[0][1].abs() < 1e-10 && hc.a_hat[1][0].abs() < 1e-10);
        hc.check(1.0, 3.0, 1e-8).unwrap();
    }

    #[test]
    fn constant_drift_is_not_modified() {
        let a = catalog::checkerboard();
        let zero = CoefficientField::zero_vector();
        let sol = solve_correctors(&a, &zero, &grid(16)).unwrap();
        let b = CoefficientField::constant_vector([0.3, -1.2]);
        let hc = homogenized_coefficients(&a, &zero, &b, &CoefficientField::zero_scalar(), 0.0, &sol).unwrap();
        assert!(close(hc.b_hat[0], 0.3, 1e-8) && close(hc.b_hat[1], -1.2, 1e-8));
    }

    #[test]
    fn mismatched_solution_is_rejected() {
        let zero = CoefficientField::zero_vector();
        let sol = solve_correctors(&CoefficientField::identity(), &zero, &grid(8)).unwrap();
        let err = homogenized_coefficients(&catalog::laminate(), &zero, &zero, &CoefficientField::zero_scalar(), 0.0, &sol);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn voigt_reuss_sandwich() {
        let a = catalog::checkerboard();
        let g = grid(64);
        let zero = CoefficientField::zero_vector();
        let sol = solve_correctors(&a, &zero, &g).unwrap();
        let hc = homogenized_coefficients(&a, &zero, &zero, &CoefficientField::zero_scalar(), 0.0, &sol).unwrap();
        let (voigt, reuss) = voigt_reuss(&a, &g).unwrap();
        for xi in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -2.0]] {
            let q = |m: &Mat2| dot(mat_vec(m, xi), xi);
            assert!(q(&reuss) <= q(&hc.a_hat) + 1e-10);
            assert!(q(&hc.a_hat) <= q(&voigt) + 1e-10);
        }
    }

    #[test]
    fn energy_identity_holds() {
        let a = catalog::checkerboard();
        let g = grid(32);
        let zero = CoefficientField::zero_vector();
        let sol = solve_correctors(&a, &zero, &g).unwrap();
        let hc = homogenized_coefficients(&a, &zero, &zero, &CoefficientField::zero_scalar(), 0.0, &sol).unwrap();
        for xi in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let energy = g.average(|k, y| {
                let gx = [
                    xi[0] + xi[0] * sol.grad_chi(0)[k][0] + xi[1] * sol.grad_chi(1)[k][0],
                    xi[1] + xi[0] * sol.grad_chi(0)[k][1] + xi[1] * sol.grad_chi(1)[k][1],
                ];
                dot(mat_vec(&a.mat(y), gx), gx)
            });
            let lhs = dot(mat_vec(&hc.a_hat, xi), xi);
            assert!(close(lhs, energy, 1e-8), "{lhs} vs {energy}");
        }
    }

    #[test]
    fn gradients_do_not_depend_on_the_initial_guess() {
        let a = catalog::checkerboard();
        let h = a.column(1).unwrap();
        let g = grid(16);
        let (u1, _) = solve_cell_general_with(&a, &h, &g, &CellOptions::default()).unwrap();
        let guess: Vec<f64> = (0..g.node_count()).map(|i| crate::math::sin(i as f64)).collect();
        let opts = CellOptions {
            initial_guess: Some(guess),
            ..CellOptions::default()
        };
        let (u2, _) = solve_cell_general_with(&a, &h, &g, &opts).unwrap();
        let (g1, g2) = (g.quadrature_gradients(&u1), g.quadrature_gradients(&u2));
        let diff = g1.iter().zip(&g2).map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs())).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn a0_hat_is_the_mean_when_drift_vanishes() {
        let a = catalog::laminate();
        let zero = CoefficientField::zero_vector();
        let sol = solve_correctors(&a, &catalog::benchmark_v(), &grid(16)).unwrap();
        let hc = homogenized_coefficients(&a, &catalog::benchmark_v(), &zero, &catalog::benchmark_a0(), 0.0, &sol).unwrap();
        let m = crate::fields::mean_value(&catalog::benchmark_a0(), 8.0, 3).unwrap();
        assert!(close(hc.a0_hat, m.value, 1e-12));
    }

    #[test]
    fn homogenized_matrix_converges_at_second_order() {
        let a = catalog::checkerboard();
        let zero = CoefficientField::zero_vector();
        let a_hat = |n: usize| {
            let sol = solve_correctors(&a, &zero, &grid(n)).unwrap();
            homogenized_coefficients(&a, &zero, &zero, &CoefficientField::zero_scalar(), 0.0, &sol).unwrap().a_hat
        };
        let (a32, a64, a128) = (a_hat(32), a_hat(64), a_hat(128));
        let diff = |x: Mat2, y: Mat2| (0..2).flat_map(|i| (0..2).map(move |j| (x[i][j] - y[i][j]).abs())).fold(0.0, f64::max);
        let order = crate::math::ln(diff(a32, a64) / diff(a64, a128)) / core::f64::consts::LN_2;
        assert!(order >= 1.8, "observed order {order}");
    }

    #[test]
    fn interpolation_reproduces_nodes_and_wraps() {
        let g = grid(8);
        let vals: Vec<f64> = (0..64).map(|i| i as f64).collect();
        assert_eq!(g.interpolate(&vals, g.coord(3, 5)), vals[g.node(3, 5)]);
        assert!(close(g.interpolate(&vals, [1.0 + 3.0 / 8.0, -3.0 / 8.0]), vals[g.node(3, 5)], 1e-12));
    }
}
