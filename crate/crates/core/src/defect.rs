//! Correctors of periodic media with a localized defect. The corrector
//! `χ₀` of `-div(A∇χ₀ + V) = 0` splits into the periodic corrector `χ_per`
//! of the background plus a decaying part `χ₀⁰`, computed here on the box
//! `[-L, L]²` with homogeneous Dirichlet data.

use alloc::vec::Vec;

use crate::cell::{solve_correctors_with, CellOptions, CellSolution, PeriodicGrid};
use crate::error::{Error, Result};
use crate::fem::{self, shape_grad, LocalCoeffs, QuadPoint, Topology, UniformGrid, GAUSS_POINTS};
use crate::fields::{CoefficientField, FieldKind};
use crate::linalg::{conjugate_gradient, bicgstab, IterativeOptions, LinearSolveReport, Preconditioner};
use crate::math::{exp, floor, sqrt, Vec2};
use crate::solver::{BoundaryTag, DiscreteField};

/// Width, in periods, of the boundary strip that localized defects must avoid.
pub const BOUNDARY_STRIP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectOptions {
    /// Relative tolerance of the periodic cell solves.
    pub cell_tol: f64,
    /// Relative tolerance of the box solve.
    pub box_tol: f64,
    pub max_iter: usize,
    /// A Gaussian is truncated when it exceeds this fraction of its
    /// amplitude inside the boundary strip.
    pub truncation_tol: f64,
}

impl Default for DefectOptions {
    fn default() -> Self {
        DefectOptions {
            cell_tol: 1e-12,
            box_tol: 1e-10,
            max_iter: 20_000,
            truncation_tol: 1e-10,
        }
    }
}

/// Periodic correctors of `A_per`, `V_per`; Gaussian terms of the inputs are
/// dropped first.
pub fn solve_periodic_part(a_per: &CoefficientField, v_per: &CoefficientField, n: usize) -> Result<CellSolution> {
    solve_periodic_part_with(a_per, v_per, n, &DefectOptions::default())
}

pub fn solve_periodic_part_with(
    a_per: &CoefficientField,
    v_per: &CoefficientField,
    n: usize,
    opts: &DefectOptions,
) -> Result<CellSolution> {
    let grid = PeriodicGrid::new(n)?;
    let cell = CellOptions {
        tol: opts.cell_tol,
        ..CellOptions::default()
    };
    solve_correctors_with(&a_per.periodic_part(), &v_per.periodic_part(), &grid, &cell)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefectCorrector {
    half_width: usize,
    n: usize,
    chi_per: CellSolution,
    chi00: DiscreteField,
    annulus_energies: Vec<(f64, f64)>,
    rhs_norm: f64,
    residual: f64,
    linear: LinearSolveReport,
}

impl DefectCorrector {
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Grid cells per period.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn chi_per(&self) -> &CellSolution {
        &self.chi_per
    }

    /// `χ₀⁰` on `[-L, L]²`, zero on the boundary.
    pub fn chi00(&self) -> &DiscreteField {
        &self.chi00
    }

    /// `(R, ∫ |∇χ₀⁰|² + |χ₀⁰|²)` over the square annuli `R-1 <= |x|_∞ < R`.
    pub fn annulus_energies(&self) -> &[(f64, f64)] {
        &self.annulus_energies
    }

    pub fn total_energy(&self) -> f64 {
        self.annulus_energies.iter().map(|(_, e)| e).sum()
    }

    /// Energy in the outer half of the annuli relative to the total.
    pub fn tail_fraction(&self) -> f64 {
        let total = self.total_energy();
        if total == 0.0 {
            return 0.0;
        }
        let half = self.half_width as f64 / 2.0;
        self.annulus_energies.iter().filter(|(r, _)| *r > half).map(|(_, e)| e).sum::<f64>() / total
    }

    /// Norm of the box right-hand side `-∫(A₀∇χ_per + V₀)·∇φ`.
    pub fn rhs_norm(&self) -> f64 {
        self.rhs_norm
    }

    /// `‖r‖ / ‖b‖` over interior nodes, where `r` is the residual of
    /// `χ_per + χ₀⁰` in the full discrete equation and `b` the box right-hand
    /// side (the full load of `V` when `b` vanishes).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn linear_report(&self) -> &LinearSolveReport {
        &self.linear
    }

    /// `χ₀ = χ_per + χ₀⁰` at a node of the box grid.
    pub fn chi0_node(&self, i: usize, j: usize) -> f64 {
        let n = self.n as isize;
        let l = self.half_width as isize;
        let g = self.chi_per.grid();
        self.chi_per.chi0()[g.node((i as isize - l * n).rem_euclid(n), (j as isize - l * n).rem_euclid(n))]
            + self.chi00.value(i, j)
    }
}

fn check_truncation(field: &CoefficientField, l: f64, tol: f64) -> Result<()> {
    let inner = l - BOUNDARY_STRIP;
    for g in field.gaussians() {
        if g.amplitude == 0.0 {
            continue;
        }
        let c = g.center[0].abs().max(g.center[1].abs());
        if c >= inner {
            return Err(Error::Truncation(alloc::format!(
                "defect centre ({}, {}) lies in the outer {BOUNDARY_STRIP} periods of the box [-{l}, {l}]²",
                g.center[0],
                g.center[1]
            )));
        }
        let d = inner - c;
        if exp(-d * d / (g.sigma * g.sigma)) > tol {
            return Err(Error::Truncation(alloc::format!(
                "defect of width {} centred at ({}, {}) reaches the boundary strip of [-{l}, {l}]²; enlarge L",
                g.sigma,
                g.center[0],
                g.center[1]
            )));
        }
    }
    Ok(())
}

fn box_grid(l: usize, n: usize) -> UniformGrid {
    UniformGrid {
        origin: [-(l as f64), -(l as f64)],
        spacing: 1.0 / n as f64,
        cells: [2 * l * n, 2 * l * n],
    }
}

/// Solves `-div(A∇w) = div(A₀∇χ_per + V₀)` on `[-L, L]²`, `w = 0` on the
/// boundary, where `A₀ = A - A_per`, `V₀ = V - V_per` are the Gaussian parts.
pub fn solve_defect_part(
    a: &CoefficientField,
    v: &CoefficientField,
    chi_per: &CellSolution,
    l: usize,
    n: usize,
) -> Result<DefectCorrector> {
    solve_defect_part_with(a, v, chi_per, l, n, &DefectOptions::default())
}

pub fn solve_defect_part_with(
    a: &CoefficientField,
    v: &CoefficientField,
    chi_per: &CellSolution,
    l: usize,
    n: usize,
    opts: &DefectOptions,
) -> Result<DefectCorrector> {
    a.expect_kind(FieldKind::Matrix)?;
    v.expect_kind(FieldKind::Vector)?;
    if l < 4 {
        return Err(Error::config(alloc::format!("box half-width L = {l} must be at least 4 periods")));
    }
    if chi_per.grid().n() != n {
        return Err(Error::config("periodic corrector grid does not match the box resolution"));
    }
    let (a_cell, v_cell) = chi_per.coefficients();
    if *a_cell != a.periodic_part() || *v_cell != v.periodic_part() {
        return Err(Error::config("periodic corrector was computed for a different background medium"));
    }
    check_truncation(a, l as f64, opts.truncation_tol)?;
    check_truncation(v, l as f64, opts.truncation_tol)?;

    let grid = box_grid(l, n);
    let topo = Topology::Dirichlet(grid);
    let grad_per = chi_per.grad_chi0();
    let cell_index = |p: &QuadPoint| ((p.elem[1] % n) * n + p.elem[0] % n) * 4 + p.q;
    let rhs = fem::assemble_flux_load(&topo, |p| {
        let a0 = a.mat_decaying(p.x);
        let g = grad_per[cell_index(p)];
        let v0 = v.vec_decaying(p.x);
        [
            a0[0][0] * g[0] + a0[0][1] * g[1] + v0[0],
            a0[1][0] * g[0] + a0[1][1] * g[1] + v0[1],
        ]
    });
    let rhs_norm = sqrt(rhs.iter().map(|x| x * x).sum());
    let nd = topo.ndof();
    let (w, linear) = if rhs.iter().all(|&x| x == 0.0) {
        (
            alloc::vec![0.0; nd],
            LinearSolveReport {
                iterations: 0,
                residual_norm: 0.0,
                method: crate::linalg::SolveMethod::Cg,
            },
        )
    } else {
        let k = fem::assemble_operator(&topo, |p| LocalCoeffs::diffusion(a.mat(p.x)))?;
        let it = IterativeOptions {
            tol: opts.box_tol,
            max_iter: opts.max_iter,
            preconditioner: Preconditioner::Ilu0,
            zero_mean_weights: None,
        };
        if k.is_symmetric() {
            conjugate_gradient(&k, &rhs, None, &it)?
        } else {
            bicgstab(&k, &rhs, None, &it)?
        }
    };
    let chi00 = DiscreteField::from_interior(grid, &w)?;
    let annulus_energies = annuli(&chi00, l);
    let mut dc = DefectCorrector {
        half_width: l,
        n,
        chi_per: chi_per.clone(),
        chi00,
        annulus_energies,
        rhs_norm,
        residual: 0.0,
        linear,
    };
    dc.residual = full_residual(&dc, a, v, rhs_norm);
    Ok(dc)
}

/// Energy of `w` per integer square annulus.
fn annuli(w: &DiscreteField, l: usize) -> Vec<(f64, f64)> {
    let g = w.grid();
    let h = g.spacing;
    let mut energy = alloc::vec![0.0; l];
    for ej in 0..g.cells[1] {
        for ei in 0..g.cells[0] {
            let o = g.coord(ei, ej);
            let c = [o[0] + 0.5 * h, o[1] + 0.5 * h];
            let r = (floor(c[0].abs().max(c[1].abs())) as usize).min(l - 1);
            let e = w.element(ei, ej);
            let mut s = 0.0;
            for (val, gr) in fem::element_values(e).iter().zip(fem::element_gradients(e, h)) {
                s += val * val + gr[0] * gr[0] + gr[1] * gr[1];
            }
            energy[r] += 0.25 * h * h * s;
        }
    }
    energy.into_iter().enumerate().map(|(r, e)| ((r + 1) as f64, e)).collect()
}

/// Residual of `χ_per + χ₀⁰` in `∫(A∇χ + V)·∇φ = 0` at interior nodes.
fn full_residual(dc: &DefectCorrector, a: &CoefficientField, v: &CoefficientField, rhs_norm: f64) -> f64 {
    let g = *dc.chi00.grid();
    let h = g.spacing;
    let dn: [[Vec2; 4]; 4] = core::array::from_fn(|q| shape_grad(GAUSS_POINTS[q]));
    let mut r = alloc::vec![0.0; g.node_count()];
    let mut load = alloc::vec![0.0; g.node_count()];
    for ej in 0..g.cells[1] {
        for ei in 0..g.cells[0] {
            let nodes = g.element_nodes(ei, ej);
            let vals = [
                dc.chi0_node(ei, ej),
                dc.chi0_node(ei + 1, ej),
                dc.chi0_node(ei, ej + 1),
                dc.chi0_node(ei + 1, ej + 1),
            ];
            let grads = fem::element_gradients(vals, h);
            let o = g.coord(ei, ej);
            for q in 0..4 {
                let x = [o[0] + GAUSS_POINTS[q][0] * h, o[1] + GAUSS_POINTS[q][1] * h];
                let m = a.mat(x);
                let vv = v.vec(x);
                let gq = grads[q];
                let flux = [
                    m[0][0] * gq[0] + m[0][1] * gq[1] + vv[0],
                    m[1][0] * gq[0] + m[1][1] * gq[1] + vv[1],
                ];
                for k in 0..4 {
                    // ∫ F·∇φ with ∇φ = dN/h and weight h²/4.
                    r[nodes[k]] += 0.25 * h * (flux[0] * dn[q][k][0] + flux[1] * dn[q][k][1]);
                    load[nodes[k]] += 0.25 * h * (vv[0] * dn[q][k][0] + vv[1] * dn[q][k][1]);
                }
            }
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 1..g.cells[1] {
        for i in 1..g.cells[0] {
            let k = g.node(i, j);
            num += r[k] * r[k];
            den += load[k] * load[k];
        }
    }
    let scale = if rhs_norm > 0.0 { rhs_norm } else { sqrt(den) };
    if scale == 0.0 {
        sqrt(num)
    } else {
        sqrt(num) / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub radius: f64,
    pub annulus_energy: f64,
    /// Energy outside the square of half-width `R`.
    pub tail_energy: f64,
    /// `(|Q_R|⁻¹ ∫_{Q_R} |χ₀⁰|²)^{1/2}`.
    pub seminorm_estimate: f64,
}

/// One row per integer radius `R = 1..=L`.
pub fn decay_report(dc: &DefectCorrector) -> Vec<DecayRow> {
    let l = dc.half_width;
    let w = &dc.chi00;
    let g = w.grid();
    let h = g.spacing;
    let mut mass = alloc::vec![0.0; l];
    for ej in 0..g.cells[1] {
        for ei in 0..g.cells[0] {
            let o = g.coord(ei, ej);
            let c = [o[0] + 0.5 * h, o[1] + 0.5 * h];
            let r = (floor(c[0].abs().max(c[1].abs())) as usize).min(l - 1);
            let s: f64 = fem::element_values(w.element(ei, ej)).iter().map(|v| v * v).sum();
            mass[r] += 0.25 * h * h * s;
        }
    }
    let total: f64 = dc.annulus_energies.iter().map(|(_, e)| e).sum();
    let mut inside_energy = 0.0;
    let mut inside_mass = 0.0;
    let mut rows = Vec::with_capacity(l);
    for (k, &(radius, e)) in dc.annulus_energies.iter().enumerate() {
        inside_energy += e;
        inside_mass += mass[k];
        let area = 4.0 * radius * radius;
        rows.push(DecayRow {
            radius,
            annulus_energy: e,
            tail_energy: (total - inside_energy).max(0.0),
            seminorm_estimate: sqrt(inside_mass / area),
        });
    }
    rows
}

/// `‖w_fine - w_coarse‖_{H¹(Q)} / ‖w_fine‖_{H¹(Q)}` on `Q = [-half, half]²`,
/// comparing two truncations of the same problem.
pub fn central_h1_change(coarse: &DefectCorrector, fine: &DefectCorrector, half: f64) -> Result<f64> {
    if coarse.n != fine.n {
        return Err(Error::config("defect correctors use different resolutions"));
    }
    let lim = coarse.half_width.min(fine.half_width) as f64;
    if !(half > 0.0 && half <= lim) {
        return Err(Error::config("central region must lie inside both boxes"));
    }
    let n = coarse.n;
    let k = (half * n as f64) as usize;
    let grid = UniformGrid {
        origin: [-(k as f64) / n as f64; 2],
        spacing: 1.0 / n as f64,
        cells: [2 * k, 2 * k],
    };
    let pick = |dc: &DefectCorrector| {
        let off = dc.half_width * n - k;
        let mut vals = Vec::with_capacity(grid.node_count());
        for j in 0..=2 * k {
            for i in 0..=2 * k {
                vals.push(dc.chi00.value(i + off, j + off));
            }
        }
        vals
    };
    let (a, b) = (pick(coarse), pick(fine));
    let diff = DiscreteField::new(grid, a.iter().zip(&b).map(|(x, y)| y - x).collect(), BoundaryTag::Free)?;
    let reference = DiscreteField::new(grid, b, BoundaryTag::Free)?;
    let base = reference.h1_norm();
    if base == 0.0 {
        return Ok(diff.h1_norm());
    }
    Ok(diff.h1_norm() / base)
}
