//! Dirichlet problems on the unit square: the oscillating operator
//! `P_ε u = -div(A^ε∇u + V^ε u) + B^ε·∇u + a0^ε u + μ u = f` and its
//! constant-coefficient homogenized counterpart.

use alloc::vec::Vec;

use crate::cell::HomogenizedCoefficients;
use crate::error::{Error, Result};
use crate::fem::{self, LocalCoeffs, Topology, UniformGrid, GAUSS_POINTS};
use crate::fields::{validate_hypotheses, CoefficientField, Expr, FieldKind};
use crate::linalg::{
    bicgstab, conjugate_gradient, solve_general, CsrMatrix, IterativeOptions, LinearSolveReport, Preconditioner,
    SolveMethod,
};
use crate::math::{ceil, floor, sqrt, sym_eigenvalues, Vec2};

/// Poincaré constant of the unit square with Dirichlet data, `1/(π√2)`.
pub const POINCARE_UNIT_SQUARE: f64 = 0.225_079_079_039_276_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Dirichlet,
    Periodic,
    Free,
}

/// Nodal Q1 field on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    grid: UniformGrid,
    values: Vec<f64>,
    boundary: BoundaryTag,
}

impl DiscreteField {
    pub fn new(grid: UniformGrid, values: Vec<f64>, boundary: BoundaryTag) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::config(alloc::format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("field values must be finite"));
        }
        if boundary == BoundaryTag::Dirichlet {
            for j in 0..grid.nodes_y() {
                for i in 0..grid.nodes_x() {
                    if grid.is_boundary(i, j) && values[grid.node(i, j)] != 0.0 {
                        return Err(Error::config("Dirichlet field must vanish on boundary nodes"));
                    }
                }
            }
        }
        Ok(DiscreteField { grid, values, boundary })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: UniformGrid, boundary: BoundaryTag, f: impl Fn(Vec2) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 0..grid.nodes_y() {
            for i in 0..grid.nodes_x() {
                values.push(f(grid.coord(i, j)));
            }
        }
        Self::new(grid, values, boundary)
    }

    /// Expands interior unknowns of a Dirichlet system to all nodes.
    pub fn from_interior(grid: UniformGrid, dofs: &[f64]) -> Result<Self> {
        let (nx, ny) = (grid.cells[0], grid.cells[1]);
        if dofs.len() != (nx - 1) * (ny - 1) {
            return Err(Error::config("interior vector length does not match the grid"));
        }
        let mut values = alloc::vec![0.0; grid.node_count()];
        for j in 1..ny {
            for i in 1..nx {
                values[grid.node(i, j)] = dofs[(j - 1) * (nx - 1) + (i - 1)];
            }
        }
        Self::new(grid, values, BoundaryTag::Dirichlet)
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn boundary(&self) -> BoundaryTag {
        self.boundary
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node(i, j)]
    }

    fn locate(&self, x: Vec2) -> Option<(usize, usize, f64, f64)> {
        let g = &self.grid;
        let tol = 1e-12;
        let mut out = [(0usize, 0.0f64); 2];
        for d in 0..2 {
            let s = (x[d] - g.origin[d]) / g.spacing;
            if s < -tol || s > g.cells[d] as f64 + tol {
                return None;
            }
            let k = (floor(s).max(0.0) as usize).min(g.cells[d] - 1);
            out[d] = (k, (s - k as f64).clamp(0.0, 1.0));
        }
        Some((out[0].0, out[1].0, out[0].1, out[1].1))
    }

    /// Bilinear interpolation; `None` outside the grid.
    pub fn value_at(&self, x: Vec2) -> Option<f64> {
        let (i, j, tx, ty) = self.locate(x)?;
        let v = |a: usize, b: usize| self.values[self.grid.node(a, b)];
        Some(
            (1.0 - ty) * ((1.0 - tx) * v(i, j) + tx * v(i + 1, j))
                + ty * ((1.0 - tx) * v(i, j + 1) + tx * v(i + 1, j + 1)),
        )
    }

    /// Gradient of the interpolant; `None` outside the grid.
    pub fn gradient_at(&self, x: Vec2) -> Option<Vec2> {
        let (i, j, tx, ty) = self.locate(x)?;
        let v = |a: usize, b: usize| self.values[self.grid.node(a, b)];
        let h = self.grid.spacing;
        Some([
            ((1.0 - ty) * (v(i + 1, j) - v(i, j)) + ty * (v(i + 1, j + 1) - v(i, j + 1))) / h,
            ((1.0 - tx) * (v(i, j + 1) - v(i, j)) + tx * (v(i + 1, j + 1) - v(i + 1, j))) / h,
        ])
    }

    /// Element nodal values in local order.
    #[inline]
    pub fn element(&self, ei: usize, ej: usize) -> [f64; 4] {
        let n = self.grid.element_nodes(ei, ej);
        [self.values[n[0]], self.values[n[1]], self.values[n[2]], self.values[n[3]]]
    }

    /// `(∫|u|², ∫|∇u|²)` over the elements lying inside `region`.
    pub fn squared_norms_on(&self, region: [Vec2; 2]) -> (f64, f64) {
        let g = &self.grid;
        let h = g.spacing;
        let w = 0.25 * h * h;
        let (mut l2, mut h1) = (0.0, 0.0);
        for ej in 0..g.cells[1] {
            for ei in 0..g.cells[0] {
                let o = g.coord(ei, ej);
                let inside = o[0] >= region[0][0] - 1e-12
                    && o[1] >= region[0][1] - 1e-12
                    && o[0] + h <= region[1][0] + 1e-12
                    && o[1] + h <= region[1][1] + 1e-12;
                if !inside {
                    continue;
                }
                let e = self.element(ei, ej);
                for (v, gr) in fem::element_values(e).iter().zip(fem::element_gradients(e, h)) {
                    l2 += w * v * v;
                    h1 += w * (gr[0] * gr[0] + gr[1] * gr[1]);
                }
            }
        }
        (l2, h1)
    }

    pub fn l2_norm(&self) -> f64 {
        sqrt(self.squared_norms_on(self.grid.extent()).0)
    }

    pub fn h1_seminorm(&self) -> f64 {
        sqrt(self.squared_norms_on(self.grid.extent()).1)
    }

    pub fn h1_norm(&self) -> f64 {
        let (a, b) = self.squared_norms_on(self.grid.extent());
        sqrt(a + b)
    }

    /// Discrete `H²` seminorm from second differences at interior nodes.
    pub fn h2_seminorm(&self) -> f64 {
        let g = &self.grid;
        let h = g.spacing;
        let v = |i: usize, j: usize| self.values[g.node(i, j)];
        let mut total = 0.0;
        for j in 1..g.cells[1] {
            for i in 1..g.cells[0] {
                let uxx = (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / (h * h);
                let uyy = (v(i, j + 1) - 2.0 * v(i, j) + v(i, j - 1)) / (h * h);
                let uxy = (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h * h);
                total += h * h * (uxx * uxx + 2.0 * uxy * uxy + uyy * uyy);
            }
        }
        sqrt(total)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// `μ₀ = α₀ + 2α₀²/α`: with `μ ≥ μ₀` the bilinear form controls `(α/2)‖∇u‖²`.
pub fn compute_mu0(alpha: f64, beta: f64, alpha0: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::hypothesis(alloc::format!("ellipticity constant alpha = {alpha} must be positive"), None));
    }
    if beta < alpha {
        return Err(Error::hypothesis(alloc::format!("beta = {beta} is below alpha = {alpha}"), None));
    }
    if !(alpha0 >= 0.0) || !alpha0.is_finite() {
        return Err(Error::hypothesis(alloc::format!("alpha0 = {alpha0} must be finite and non-negative"), None));
    }
    Ok(alpha0 + 2.0 * alpha0 * alpha0 / alpha)
}

/// Coefficients, zero-order shift and source of a Dirichlet problem on `(0,1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    a: CoefficientField,
    v: CoefficientField,
    b: CoefficientField,
    a0: CoefficientField,
    mu: f64,
    mu0: f64,
    f: Expr,
}

impl ProblemSpec {
    /// Validates every field against its declared bounds. The shift used is
    /// `max(mu, μ₀)`.
    pub fn new(
        a: CoefficientField,
        v: CoefficientField,
        b: CoefficientField,
        a0: CoefficientField,
        mu: f64,
        f: Expr,
    ) -> Result<Self> {
        a.expect_kind(FieldKind::Matrix)?;
        v.expect_kind(FieldKind::Vector)?;
        b.expect_kind(FieldKind::Vector)?;
        a0.expect_kind(FieldKind::Scalar)?;
        if !mu.is_finite() {
            return Err(Error::config("mu must be finite"));
        }
        for field in [&a, &v, &b, &a0] {
            validate_hypotheses(field, 16, 8)?;
        }
        let alpha = a.alpha().unwrap_or(0.0);
        let beta = a.beta().unwrap_or(alpha);
        let alpha0 = [&v, &b, &a0].iter().filter_map(|f| f.alpha0()).fold(0.0, f64::max);
        let mu0 = compute_mu0(alpha, beta, alpha0)?;
        Ok(ProblemSpec {
            a,
            v,
            b,
            a0,
            mu: mu.max(mu0),
            mu0,
            f,
        })
    }

    pub fn a(&self) -> &CoefficientField {
        &self.a
    }

    pub fn v(&self) -> &CoefficientField {
        &self.v
    }

    pub fn b(&self) -> &CoefficientField {
        &self.b
    }

    pub fn a0(&self) -> &CoefficientField {
        &self.a0
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }

    /// Effective shift `max(mu, μ₀)`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn alpha(&self) -> f64 {
        self.a.alpha().unwrap_or(0.0)
    }

    pub fn beta(&self) -> f64 {
        self.a.beta().unwrap_or(0.0)
    }

    pub fn alpha0(&self) -> f64 {
        [&self.v, &self.b, &self.a0].iter().filter_map(|f| f.alpha0()).fold(0.0, f64::max)
    }

    /// The formal adjoint: `V` and `B` interchanged.
    pub fn adjoint(&self) -> ProblemSpec {
        ProblemSpec {
            v: self.b.clone(),
            b: self.v.clone(),
            ..self.clone()
        }
    }

    /// True when some coefficient varies in space.
    pub fn is_oscillating(&self) -> bool {
        ![&self.a, &self.v, &self.b, &self.a0].iter().all(|f| f.is_constant())
    }

    /// `C` in `‖u‖_{H¹} ≤ C ‖f‖_{L²}`: `(2 C_P / α) √(1 + C_P²)`.
    pub fn stability_constant(&self) -> f64 {
        let cp = POINCARE_UNIT_SQUARE;
        2.0 * cp / self.alpha() * sqrt(1.0 + cp * cp)
    }
}

/// Smallest `m` resolving period `eps` with 16 cells.
pub fn required_resolution(eps: f64) -> usize {
    ceil(16.0 / eps - 1e-9) as usize
}

/// Reference resolution `max(m_min, 32/ε)`, rounded up to an even count.
pub fn fine_resolution(eps: f64, m_min: usize) -> usize {
    let m = m_min.max(ceil(32.0 / eps - 1e-9) as usize);
    m + m % 2
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::config(alloc::format!("eps = {eps} must lie in (0, 1]")));
    }
    Ok(())
}

/// Q1 system of `P_ε` with Dirichlet rows and columns eliminated; load `∫ f v`.
pub fn assemble_dirichlet(spec: &ProblemSpec, eps: f64, m: usize) -> Result<(CsrMatrix, Vec<f64>)> {
    check_eps(eps)?;
    if m < 2 {
        return Err(Error::config("m must be at least 2"));
    }
    if spec.is_oscillating() && (m as f64) * eps < 16.0 - 1e-9 {
        return Err(Error::UnderResolved {
            m,
            eps,
            required_m: required_resolution(eps),
        });
    }
    let topo = Topology::Dirichlet(UniformGrid::unit_square(m));
    let inv = 1.0 / eps;
    let mu = spec.mu;
    let k = fem::assemble_operator(&topo, |p| {
        let y = [p.x[0] * inv, p.x[1] * inv];
        LocalCoeffs {
            a: spec.a.mat(y),
            v: spec.v.vec(y),
            b: spec.b.vec(y),
            c: spec.a0.scal(y) + mu,
        }
    })?;
    let rhs = fem::assemble_load(&topo, |p| spec.f.eval(p.x));
    Ok((k, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Systems with at most this many unknowns use the banded LU.
    pub direct_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 20_000,
            direct_limit: 16_384,
        }
    }
}

/// Banded LU for small systems; ILU(0)-preconditioned CG (symmetric) or
/// BiCGStab (non-symmetric) otherwise.
pub fn solve_linear(k: &CsrMatrix, rhs: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, LinearSolveReport)> {
    if rhs.iter().all(|&x| x == 0.0) {
        let report = LinearSolveReport {
            iterations: 0,
            residual_norm: 0.0,
            method: SolveMethod::Lu,
        };
        return Ok((alloc::vec![0.0; rhs.len()], report));
    }
    if k.nrows() <= opts.direct_limit {
        return solve_general(k, rhs);
    }
    let it = IterativeOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        preconditioner: Preconditioner::Ilu0,
        zero_mean_weights: None,
    };
    if k.is_symmetric() {
        conjugate_gradient(k, rhs, None, &it)
    } else {
        bicgstab(k, rhs, None, &it)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub linear: LinearSolveReport,
    pub h1_norm: f64,
    pub f_l2: f64,
    /// `C` of the a-priori bound `‖u‖_{H¹} ≤ C ‖f‖`.
    pub stability_constant: f64,
    pub within_bound: bool,
}

fn source_l2(f: &Expr, grid: &UniformGrid) -> f64 {
    let h = grid.spacing;
    let mut total = 0.0;
    for ej in 0..grid.cells[1] {
        for ei in 0..grid.cells[0] {
            let o = grid.coord(ei, ej);
            for g in GAUSS_POINTS {
                let v = f.eval([o[0] + g[0] * h, o[1] + g[1] * h]);
                total += v * v;
            }
        }
    }
    sqrt(0.25 * h * h * total)
}

/// Q1 solution of `P_ε u = f`, `u = 0` on the boundary.
pub fn solve_oscillating(spec: &ProblemSpec, eps: f64, m: usize) -> Result<(DiscreteField, SolveReport)> {
    solve_oscillating_with(spec, eps, m, &SolverOptions::default())
}

pub fn solve_oscillating_with(
    spec: &ProblemSpec,
    eps: f64,
    m: usize,
    opts: &SolverOptions,
) -> Result<(DiscreteField, SolveReport)> {
    let (k, rhs) = assemble_dirichlet(spec, eps, m)?;
    let (x, linear) = solve_linear(&k, &rhs, opts)?;
    let grid = UniformGrid::unit_square(m);
    let u = DiscreteField::from_interior(grid, &x)?;
    let h1_norm = u.h1_norm();
    let f_l2 = source_l2(&spec.f, &grid);
    let c = spec.stability_constant();
    let report = SolveReport {
        linear,
        h1_norm,
        f_l2,
        stability_constant: c,
        within_bound: h1_norm <= c * f_l2 * (1.0 + 1e-8) + 1e-14,
    };
    Ok((u, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizedReport {
    pub linear: LinearSolveReport,
    /// Second-difference `H²` seminorm of `u₀`.
    pub h2_seminorm: f64,
}

/// Q1 solution of `-div(Â∇u + V̂u) + B̂·∇u + (â₀ + μ)u = f`, `u = 0` on the boundary.
pub fn solve_homogenized(coeffs: &HomogenizedCoefficients, f: &Expr, m: usize) -> Result<(DiscreteField, HomogenizedReport)> {
    solve_homogenized_with(coeffs, f, m, &SolverOptions::default())
}

pub fn solve_homogenized_with(
    coeffs: &HomogenizedCoefficients,
    f: &Expr,
    m: usize,
    opts: &SolverOptions,
) -> Result<(DiscreteField, HomogenizedReport)> {
    if m < 2 {
        return Err(Error::config("m must be at least 2"));
    }
    let (lo, _) = sym_eigenvalues(&coeffs.a_hat);
    if !(lo > 0.0) {
        return Err(Error::hypothesis("homogenized matrix is not positive definite", None));
    }
    let grid = UniformGrid::unit_square(m);
    let topo = Topology::Dirichlet(grid);
    let local = LocalCoeffs {
        a: coeffs.a_hat,
        v: coeffs.v_hat,
        b: coeffs.b_hat,
        c: coeffs.a0_hat + coeffs.mu,
    };
    let k = fem::assemble_operator(&topo, |_| local)?;
    let rhs = fem::assemble_load(&topo, |p| f.eval(p.x));
    let (x, linear) = solve_linear(&k, &rhs, opts)?;
    let u = DiscreteField::from_interior(grid, &x)?;
    let h2_seminorm = u.h2_seminorm();
    Ok((u, HomogenizedReport { linear, h2_seminorm }))
}
