//! Error norms, log-log slope fits and ε-sweeps comparing `u_ε` with `u₀`
//! and with the first-order approximation `v_ε`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::approx::{boundary_layer_indicator, first_order_approx};
use crate::cell::{homogenized_coefficients, solve_correctors_with, CellOptions, CellSolution, HomogenizedCoefficients, PeriodicGrid};
use crate::error::{Error, Result};
use crate::fem::UniformGrid;
use crate::math::{exp, ln, round, sqrt};
use crate::solver::{fine_resolution, solve_homogenized_with, solve_oscillating_with, BoundaryTag, DiscreteField, ProblemSpec, SolverOptions};

fn same_extent(a: &UniformGrid, b: &UniformGrid) -> bool {
    let (ea, eb) = (a.extent(), b.extent());
    (0..2).all(|k| (0..2).all(|d| (ea[k][d] - eb[k][d]).abs() <= 1e-12 * (1.0 + ea[k][d].abs())))
}

/// `u - v` on the finer of the two grids; the coarser field is
/// interpolated bilinearly onto it.
pub fn difference(u: &DiscreteField, v: &DiscreteField) -> Result<DiscreteField> {
    if !same_extent(u.grid(), v.grid()) {
        return Err(Error::config("fields live on different domains"));
    }
    let (fine, coarse, sign) = if u.grid().spacing <= v.grid().spacing { (u, v, 1.0) } else { (v, u, -1.0) };
    let g = *fine.grid();
    let mut vals = Vec::with_capacity(g.node_count());
    let same = fine.grid() == coarse.grid();
    for j in 0..g.nodes_y() {
        for i in 0..g.nodes_x() {
            let c = if same {
                coarse.value(i, j)
            } else {
                coarse
                    .value_at(g.coord(i, j))
                    .ok_or_else(|| Error::config("interpolation point outside the coarse grid"))?
            };
            vals.push(sign * (fine.value(i, j) - c));
        }
    }
    DiscreteField::new(g, vals, BoundaryTag::Free)
}

/// `‖u - v‖_{L²}` by 2x2 Gauss quadrature.
pub fn error_l2(u: &DiscreteField, v: &DiscreteField) -> Result<f64> {
    Ok(difference(u, v)?.l2_norm())
}

/// `‖u - v‖_{H¹} = (‖u - v‖² + ‖∇(u - v)‖²)^{1/2}`.
pub fn error_h1(u: &DiscreteField, v: &DiscreteField) -> Result<f64> {
    Ok(difference(u, v)?.h1_norm())
}

/// `H¹` error restricted to the elements inside `region`.
pub fn error_h1_on(u: &DiscreteField, v: &DiscreteField, region: [[f64; 2]; 2]) -> Result<f64> {
    let (a, b) = difference(u, v)?.squared_norms_on(region);
    Ok(sqrt(a + b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// `C` in `err ≈ C ε^slope`.
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Least squares on `(ln ε, ln err)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData { got: points.len(), needed: 3 });
    }
    if let Some(&(e, v)) = points.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0 && e.is_finite() && v.is_finite())) {
        return Err(Error::DegenerateFit(alloc::format!("cannot fit a power law through ({e}, {v})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| ln(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| ln(p.1)).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        prefactor: exp(intercept),
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePolicy {
    /// Lower bound of the reference resolution `max(m_min, 32/ε)`.
    pub m_min: usize,
    /// Cell-grid size; `None` aligns the cell grid with the fine mesh,
    /// `n = m_fine ε`.
    pub cell_n: Option<usize>,
    /// Largest admissible ratio of the Richardson estimate to the `L²` error.
    pub discretization_budget: f64,
    pub solver: SolverOptions,
    pub cell_tol: f64,
}

impl Default for RatePolicy {
    fn default() -> Self {
        RatePolicy {
            m_min: 1024,
            cell_n: None,
            discretization_budget: 0.25,
            solver: SolverOptions::default(),
            cell_tol: 1e-11,
        }
    }
}

impl RatePolicy {
    pub fn fine_m(&self, eps: f64) -> usize {
        fine_resolution(eps, self.m_min)
    }

    pub fn cell_grid(&self, eps: f64) -> Result<PeriodicGrid> {
        let n = match self.cell_n {
            Some(n) => n,
            None => {
                let raw = self.fine_m(eps) as f64 * eps;
                let k = round(raw / 2.0).max(2.0) as usize;
                2 * k
            }
        };
        PeriodicGrid::new(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub eps: f64,
    pub m_fine: usize,
    pub cell_n: usize,
    /// `‖u_ε - u₀‖_{L²}`.
    pub err_l2_zero_order: f64,
    /// `‖u_ε - v_ε‖_{H¹}`.
    pub err_h1_first_order: f64,
    /// `‖u_ε - u₀‖_{H¹}`.
    pub err_h1_plain: f64,
    /// `‖u_ε - v_ε‖_{H¹}` on the central quarter `[1/4, 3/4]²`.
    pub err_h1_first_order_interior: f64,
    pub norm_h1_ueps: f64,
    pub f_l2: f64,
    /// `‖u_m - u_{m/2}‖_{L²} / 3`.
    pub richardson_l2: f64,
    /// Richardson estimate exceeds the discretization budget.
    pub flagged: bool,
    /// `‖φ_ε‖_{H¹}` when `2ε < 1/2`.
    pub boundary_layer_h1: Option<f64>,
    pub u0_h2: f64,
    pub a_hat: [[f64; 2]; 2],
}

impl RateRow {
    /// `‖u_ε‖_{H¹} / ‖f‖_{L²}`.
    pub fn stability_ratio(&self) -> f64 {
        self.norm_h1_ueps / self.f_l2
    }
}

/// Whether the log-log fits could be made.
#[derive(Debug, Clone, PartialEq)]
pub enum FitStatus {
    Fitted,
    /// Errors vanish or sit at round-off, as for constant coefficients.
    Degenerate(String),
    /// Fewer than three usable rows.
    Insufficient { usable: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Sorted by decreasing ε.
    pub rows: Vec<RateRow>,
    /// Rows that could not be computed, with the reason.
    pub failures: Vec<(f64, String)>,
    pub status: FitStatus,
    pub slope_l2: Option<SlopeFit>,
    pub slope_h1: Option<SlopeFit>,
    pub slope_h1_plain: Option<SlopeFit>,
    pub slope_h1_interior: Option<SlopeFit>,
    /// The plain gradient error decays no faster than the corrected one.
    pub corrector_necessary: Option<bool>,
    /// `(max - min) / min` of `‖u_ε‖_{H¹}/‖f‖` over the rows.
    pub stability_spread: f64,
    pub stability_constant: f64,
    pub config_digest: String,
}

/// Correctors and homogenized coefficients of the periodic background.
pub fn cell_data(spec: &ProblemSpec, grid: &PeriodicGrid, tol: f64) -> Result<(CellSolution, HomogenizedCoefficients)> {
    let a = spec.a().periodic_part();
    let v = spec.v().periodic_part();
    let opts = CellOptions {
        tol,
        ..CellOptions::default()
    };
    let sol = solve_correctors_with(&a, &v, grid, &opts)?;
    let hc = homogenized_coefficients(&a, &v, &spec.b().periodic_part(), &spec.a0().periodic_part(), spec.mu(), &sol)?;
    Ok((sol, hc))
}

/// Everything one ε contributes to a sweep. Rows are independent, so callers
/// may evaluate them concurrently.
pub fn rate_row(spec: &ProblemSpec, eps: f64, policy: &RatePolicy) -> Result<RateRow> {
    let m = policy.fine_m(eps);
    let cell = policy.cell_grid(eps)?;
    let (sol, hc) = cell_data(spec, &cell, policy.cell_tol)?;
    let (u0, hrep) = solve_homogenized_with(&hc, spec.f(), m, &policy.solver)?;
    let (ue, rep) = solve_oscillating_with(spec, eps, m, &policy.solver)?;
    let (ue_half, _) = solve_oscillating_with(spec, eps, m / 2, &policy.solver)?;
    let richardson_l2 = error_l2(&ue, &ue_half)? / 3.0;
    let ve = first_order_approx(&u0, &sol, eps)?;
    let err_l2 = error_l2(&ue, &u0)?;
    let boundary_layer_h1 = if 2.0 * eps < 0.5 {
        Some(boundary_layer_indicator(&u0, &sol, eps, m)?.h1_norm)
    } else {
        None
    };
    Ok(RateRow {
        eps,
        m_fine: m,
        cell_n: cell.n(),
        err_l2_zero_order: err_l2,
        err_h1_first_order: error_h1(&ue, &ve)?,
        err_h1_plain: error_h1(&ue, &u0)?,
        err_h1_first_order_interior: error_h1_on(&ue, &ve, [[0.25, 0.25], [0.75, 0.75]])?,
        norm_h1_ueps: rep.h1_norm,
        f_l2: rep.f_l2,
        richardson_l2,
        flagged: richardson_l2 > policy.discretization_budget * err_l2,
        boundary_layer_h1,
        u0_h2: hrep.h2_seminorm,
        a_hat: hc.a_hat,
    })
}

/// Checks that `eps_list` halves from one entry to the next (in any order)
/// and returns it sorted by decreasing ε.
pub fn validate_eps_list(eps_list: &[f64]) -> Result<Vec<f64>> {
    if eps_list.len() < 3 {
        return Err(Error::InsufficientData { got: eps_list.len(), needed: 3 });
    }
    let mut sorted = eps_list.to_vec();
    if sorted.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::config("every eps must lie in (0, 1]"));
    }
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite eps"));
    for w in sorted.windows(2) {
        if (w[1] / w[0] - 0.5).abs() > 1e-9 {
            return Err(Error::config("eps list must be geometric with ratio 1/2"));
        }
    }
    Ok(sorted)
}

/// Assembles fits and diagnostics from row outcomes. Fits skip the largest ε
/// and flagged rows.
pub fn assemble_report(outcomes: Vec<(f64, Result<RateRow>)>, stability_constant: f64) -> Result<RateReport> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (eps, o) in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => failures.push((eps, alloc::format!("{e}"))),
        }
    }
    rows.sort_by(|a, b| b.eps.partial_cmp(&a.eps).expect("finite eps"));
    if rows.len() < 3 {
        return Err(Error::InsufficientData { got: rows.len(), needed: 3 });
    }
    let largest = rows[0].eps;
    let candidates: Vec<&RateRow> = rows.iter().filter(|r| r.eps < largest).collect();
    let floor = 1e-12 * rows.iter().map(|r| r.norm_h1_ueps).fold(0.0, f64::max);
    let usable: Vec<&RateRow> = candidates.iter().copied().filter(|r| !r.flagged).collect();
    let pts = |f: &dyn Fn(&RateRow) -> f64| usable.iter().map(|r| (r.eps, f(r))).collect::<Vec<_>>();
    let mut status = FitStatus::Fitted;
    let (mut slope_l2, mut slope_h1, mut slope_h1_plain, mut slope_h1_interior) = (None, None, None, None);
    if !candidates.is_empty() && candidates.iter().all(|r| r.err_l2_zero_order <= floor) {
        status = FitStatus::Degenerate("errors below floor".into());
    } else if usable.len() < 3 {
        status = FitStatus::Insufficient { usable: usable.len() };
    } else {
        match fit_slope(&pts(&|r| r.err_l2_zero_order)) {
            Ok(f) => slope_l2 = Some(f),
            Err(e) => status = FitStatus::Degenerate(alloc::format!("{e}")),
        }
        slope_h1 = fit_slope(&pts(&|r| r.err_h1_first_order)).ok();
        slope_h1_plain = fit_slope(&pts(&|r| r.err_h1_plain)).ok();
        slope_h1_interior = fit_slope(&pts(&|r| r.err_h1_first_order_interior)).ok();
    }
    let corrector_necessary = match (&slope_h1, &slope_h1_plain) {
        (Some(a), Some(b)) => Some(b.slope <= a.slope),
        _ => None,
    };
    let ratios: Vec<f64> = rows.iter().map(RateRow::stability_ratio).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    Ok(RateReport {
        rows,
        failures,
        status,
        slope_l2,
        slope_h1,
        slope_h1_plain,
        slope_h1_interior,
        corrector_necessary,
        stability_spread: if lo > 0.0 { (hi - lo) / lo } else { 0.0 },
        stability_constant,
        config_digest: String::new(),
    })
}

/// Sequential sweep over `eps_list`; see [`rate_row`] for one entry.
pub fn rate_sweep(spec: &ProblemSpec, eps_list: &[f64], policy: &RatePolicy) -> Result<RateReport> {
    let eps = validate_eps_list(eps_list)?;
    let outcomes = eps.iter().map(|&e| (e, rate_row(spec, e, policy))).collect();
    assemble_report(outcomes, spec.stability_constant())
}
