//! Smoothing operator `S_ε`, extension of Dirichlet data beyond the unit
//! square, the first-order approximation `v_ε`, and the boundary-layer
//! indicator `φ_ε`.

use alloc::vec::Vec;

use crate::cell::CellSolution;
use crate::error::{Error, Result};
use crate::fem::UniformGrid;
use crate::math::{ceil, exp, floor, round, sqrt, Vec2};
use crate::solver::{BoundaryTag, DiscreteField};

/// Radius of the mollifier support in the unit variable.
pub const MOLLIFIER_RADIUS: f64 = 0.25;

/// `θ(y) = c exp(-1 / (1 - |4y|²))` on `|y| < 1/4`, zero outside, unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    c: f64,
}

impl Default for Mollifier {
    fn default() -> Self {
        Self::new()
    }
}

fn bump(r2: f64) -> f64 {
    let s = 16.0 * r2;
    if s >= 1.0 {
        0.0
    } else {
        exp(-1.0 / (1.0 - s))
    }
}

impl Mollifier {
    /// Normalizes by the radial integral `2π ∫₀^{1/4} r bump(r²) dr`
    /// (composite Simpson, 4096 panels).
    pub fn new() -> Self {
        let n = 4096;
        let h = MOLLIFIER_RADIUS / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let r = k as f64 * h;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * r * bump(r * r);
        }
        let mass = core::f64::consts::TAU * s * h / 3.0;
        Mollifier { c: 1.0 / mass }
    }

    pub fn normalization(&self) -> f64 {
        self.c
    }

    pub fn profile(&self, y: Vec2) -> f64 {
        self.c * bump(y[0] * y[0] + y[1] * y[1])
    }

    /// Discrete kernel of `θ_ε = ε⁻² θ(·/ε)` at grid offsets of spacing `h`,
    /// renormalized to unit sum.
    pub fn kernel(&self, eps: f64, h: f64) -> Result<Kernel> {
        if !(eps > 0.0 && h > 0.0) {
            return Err(Error::config("eps and h must be positive"));
        }
        let reach = eps * MOLLIFIER_RADIUS / h;
        if reach < 2.0 {
            return Err(Error::Support(alloc::format!(
                "mollifier radius eps/4 = {} spans fewer than 2 grid cells of width {h}",
                eps * MOLLIFIER_RADIUS
            )));
        }
        let r = floor(reach) as usize;
        let mut quarter = Vec::with_capacity((r + 1) * (r + 1));
        let mut total = 0.0;
        for b in 0..=r {
            for a in 0..=r {
                let y = [a as f64 * h / eps, b as f64 * h / eps];
                let w = self.profile(y);
                let mult = match (a == 0, b == 0) {
                    (true, true) => 1.0,
                    (true, false) | (false, true) => 2.0,
                    (false, false) => 4.0,
                };
                total += mult * w;
                quarter.push(w);
            }
        }
        for w in &mut quarter {
            *w /= total;
        }
        Ok(Kernel { r, quarter })
    }
}

/// Symmetric convolution weights; `quarter[b (r+1) + a]` is the weight of
/// the four offsets `(±a, ±b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    r: usize,
    quarter: Vec<f64>,
}

impl Kernel {
    pub fn radius_nodes(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn weight(&self, a: isize, b: isize) -> f64 {
        let (a, b) = (a.unsigned_abs(), b.unsigned_abs());
        if a > self.r || b > self.r {
            0.0
        } else {
            self.quarter[b * (self.r + 1) + a]
        }
    }

    /// Sum over all `(2r+1)²` offsets.
    pub fn mass(&self) -> f64 {
        let r = self.r as isize;
        let mut s = 0.0;
        for b in -r..=r {
            for a in -r..=r {
                s += self.weight(a, b);
            }
        }
        s
    }
}

/// How Dirichlet data are continued across the edges of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflection {
    /// `ũ(-x) = -u(x)`: keeps `H²` for data vanishing on the boundary.
    Odd,
    /// `ũ(-x) = u(x)`: continuous, kinked across the edges.
    Even,
}

/// A field on `[-p, 1+p]²` agreeing with its source on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedField {
    field: DiscreteField,
    pad: f64,
    pad_nodes: usize,
    source_cells: usize,
}

impl ExtendedField {
    pub fn field(&self) -> &DiscreteField {
        &self.field
    }

    /// Actual pad width (a whole number of grid cells).
    pub fn pad(&self) -> f64 {
        self.pad
    }

    pub fn pad_nodes(&self) -> usize {
        self.pad_nodes
    }

    /// Restriction to the unit-square nodes.
    pub fn restriction(&self) -> Vec<f64> {
        let m = self.source_cells;
        let p = self.pad_nodes;
        let mut out = Vec::with_capacity((m + 1) * (m + 1));
        for j in 0..=m {
            for i in 0..=m {
                out.push(self.field.value(i + p, j + p));
            }
        }
        out
    }

    /// `‖ũ‖_{H¹(pad)} / ‖u‖_{H¹(Ω)}`.
    pub fn h1_ratio(&self, source: &DiscreteField) -> f64 {
        let base = source.h1_norm();
        if base == 0.0 {
            0.0
        } else {
            self.field.h1_norm() / base
        }
    }
}

/// Default pad width `1/4 + 2ε`.
pub fn default_pad(eps: f64) -> f64 {
    0.25 + 2.0 * eps
}

/// `C^∞` step from 0 at `t <= 0` to 1 at `t >= 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = exp(-1.0 / t);
        let b = exp(-1.0 / (1.0 - t));
        a / (a + b)
    }
}

/// One-dimensional cutoff: 1 within `p/2` of `[0, 1]`, 0 beyond `0.9 p`.
fn pad_cutoff(t: f64, p: f64) -> f64 {
    let d = if t < 0.0 {
        -t
    } else if t > 1.0 {
        t - 1.0
    } else {
        0.0
    };
    1.0 - smooth_step((d - 0.5 * p) / (0.4 * p))
}

/// Odd reflection across each edge of the unit square (double reflection in
/// the corners), times a smooth cutoff.
pub fn extend(u0: &DiscreteField, pad: f64) -> Result<ExtendedField> {
    extend_with(u0, pad, Reflection::Odd)
}

pub fn extend_with(u0: &DiscreteField, pad: f64, reflection: Reflection) -> Result<ExtendedField> {
    if !(pad > 0.0) || pad > 1.0 {
        return Err(Error::config(alloc::format!("pad width {pad} must lie in (0, 1]")));
    }
    let g = u0.grid();
    let m = g.cells[0];
    if g.cells[1] != m || g.origin != [0.0, 0.0] || (g.spacing * m as f64 - 1.0).abs() > 1e-12 {
        return Err(Error::config("extension needs a field on the unit square"));
    }
    let h = g.spacing;
    let p = (ceil(pad / h - 1e-9) as usize).min(m);
    let pad_actual = p as f64 * h;
    let grid = UniformGrid {
        origin: [-pad_actual, -pad_actual],
        spacing: h,
        cells: [m + 2 * p, m + 2 * p],
    };
    let sign = match reflection {
        Reflection::Odd => -1.0,
        Reflection::Even => 1.0,
    };
    let fold = |k: isize| -> (usize, f64) {
        let m = m as isize;
        if k < 0 {
            ((-k) as usize, sign)
        } else if k > m {
            ((2 * m - k) as usize, sign)
        } else {
            (k as usize, 1.0)
        }
    };
    let n = m + 2 * p + 1;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let (sj, wj) = fold(j as isize - p as isize);
        let cy = pad_cutoff(grid.coord(0, j)[1], pad_actual);
        for i in 0..n {
            let (si, wi) = fold(i as isize - p as isize);
            let cx = pad_cutoff(grid.coord(i, 0)[0], pad_actual);
            values.push(wi * wj * cx * cy * u0.value(si, sj));
        }
    }
    Ok(ExtendedField {
        field: DiscreteField::new(grid, values, BoundaryTag::Free)?,
        pad: pad_actual,
        pad_nodes: p,
        source_cells: m,
    })
}

/// Offset of `target` inside `source` in whole cells, if the grids align.
fn alignment(source: &UniformGrid, target: &UniformGrid) -> Result<[usize; 2]> {
    if (source.spacing - target.spacing).abs() > 1e-12 * source.spacing {
        return Err(Error::Support("target and source grids have different spacings".into()));
    }
    let mut off = [0usize; 2];
    for d in 0..2 {
        let s = (target.origin[d] - source.origin[d]) / source.spacing;
        let k = round(s);
        if (s - k).abs() > 1e-6 || k < 0.0 {
            return Err(Error::Support("target grid does not align with source nodes".into()));
        }
        off[d] = k as usize;
    }
    Ok(off)
}

/// `S_ε f` at the nodes of `target` by direct summation over the discrete
/// mollifier. The stencil must stay inside the source grid.
pub fn smooth(f: &DiscreteField, eps: f64, target: &UniformGrid) -> Result<DiscreteField> {
    let kernel = Mollifier::new().kernel(eps, f.grid().spacing)?;
    smooth_with(f, &kernel, target)
}

pub fn smooth_with(f: &DiscreteField, kernel: &Kernel, target: &UniformGrid) -> Result<DiscreteField> {
    let src = f.grid();
    let off = alignment(src, target)?;
    let r = kernel.r;
    for d in 0..2 {
        if off[d] < r || off[d] + target.cells[d] + r > src.cells[d] {
            return Err(Error::Support(alloc::format!(
                "mollifier stencil of {r} nodes leaves the padded grid; pad at least eps/4 beyond the target"
            )));
        }
    }
    let nx = src.nodes_x();
    let vals = f.values();
    let q = &kernel.quarter;
    let mut out = Vec::with_capacity(target.node_count());
    for tj in 0..target.nodes_y() {
        for ti in 0..target.nodes_x() {
            let c = (off[1] + tj) * nx + off[0] + ti;
            let mut s = q[0] * vals[c];
            for a in 1..=r {
                s += q[a] * (vals[c + a] + vals[c - a]);
            }
            for b in 1..=r {
                let up = c + b * nx;
                let dn = c - b * nx;
                let row = &q[b * (r + 1)..(b + 1) * (r + 1)];
                s += row[0] * (vals[up] + vals[dn]);
                for a in 1..=r {
                    s += row[a] * (vals[up + a] + vals[up - a] + vals[dn + a] + vals[dn - a]);
                }
            }
            out.push(s);
        }
    }
    DiscreteField::new(*target, out, BoundaryTag::Free)
}

/// `S_ε ũ` and `S_ε ∇ũ` at the nodes of the unit-square grid of `ext`.
/// The gradient is taken as central differences of `S_ε ũ`, which equals
/// `S_ε` of the central differences of `ũ` since both are translation invariant.
pub struct Smoothed {
    pub value: Vec<f64>,
    pub grad: Vec<Vec2>,
    pub grid: UniformGrid,
}

pub fn smooth_with_gradient(ext: &ExtendedField, eps: f64) -> Result<Smoothed> {
    let h = ext.field.grid().spacing;
    let m = ext.source_cells;
    let grown = UniformGrid {
        origin: [-h, -h],
        spacing: h,
        cells: [m + 2, m + 2],
    };
    let s = smooth(&ext.field, eps, &grown)?;
    let grid = UniformGrid::unit_square(m);
    let mut value = Vec::with_capacity(grid.node_count());
    let mut grad = Vec::with_capacity(grid.node_count());
    for j in 0..=m {
        for i in 0..=m {
            let (gi, gj) = (i + 1, j + 1);
            value.push(s.value(gi, gj));
            grad.push([
                (s.value(gi + 1, gj) - s.value(gi - 1, gj)) / (2.0 * h),
                (s.value(gi, gj + 1) - s.value(gi, gj - 1)) / (2.0 * h),
            ]);
        }
    }
    Ok(Smoothed { value, grad, grid })
}

/// Restriction of a unit-square field to every `stride`-th node.
pub fn restrict(u: &DiscreteField, stride: usize) -> Result<DiscreteField> {
    let g = u.grid();
    if stride == 0 || g.cells[0] % stride != 0 || g.cells[1] % stride != 0 {
        return Err(Error::config("stride must divide the grid size"));
    }
    let coarse = UniformGrid {
        origin: g.origin,
        spacing: g.spacing * stride as f64,
        cells: [g.cells[0] / stride, g.cells[1] / stride],
    };
    let mut vals = Vec::with_capacity(coarse.node_count());
    for j in 0..coarse.nodes_y() {
        for i in 0..coarse.nodes_x() {
            vals.push(u.value(i * stride, j * stride));
        }
    }
    DiscreteField::new(coarse, vals, u.boundary())
}

/// Coarsening factor used before smoothing: the largest power of two `s`
/// dividing `m` with `s h <= ε / 64`, so the kernel spans about 16 nodes.
pub fn smoothing_stride(m: usize, eps: f64) -> usize {
    let h = 1.0 / m as f64;
    let mut s = 1;
    while m % (2 * s) == 0 && (2 * s) as f64 * h <= eps / 64.0 + 1e-15 && m / (2 * s) >= 8 {
        s *= 2;
    }
    s
}

/// `v_ε = u₀ + ε χ^ε S_ε(∇ũ₀) + ε χ₀^ε S_ε(ũ₀)` at the nodes of `u0`'s grid,
/// `χ^ε(x) = χ(x/ε)` by periodic bilinear interpolation.
pub fn first_order_approx(u0: &DiscreteField, sol: &CellSolution, eps: f64) -> Result<DiscreteField> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::config("eps must lie in (0, 1]"));
    }
    let g = *u0.grid();
    if g != UniformGrid::unit_square(g.cells[0]) {
        return Err(Error::config("u0 must live on a uniform grid over the unit square"));
    }
    let m = g.cells[0];
    let stride = smoothing_stride(m, eps);
    let coarse = restrict(u0, stride)?;
    let ext = extend(&coarse, default_pad(eps).min(1.0))?;
    let s = smooth_with_gradient(&ext, eps)?;
    let coarse_field = |vals: Vec<f64>| DiscreteField::new(s.grid, vals, BoundaryTag::Free);
    let sv = coarse_field(s.value)?;
    let sg: [DiscreteField; 2] = [
        coarse_field(s.grad.iter().map(|v| v[0]).collect())?,
        coarse_field(s.grad.iter().map(|v| v[1]).collect())?,
    ];
    let inv = 1.0 / eps;
    let mut out = Vec::with_capacity(g.node_count());
    for j in 0..=m {
        for i in 0..=m {
            let x = g.coord(i, j);
            let (svx, g1, g2) = if stride == 1 {
                let k = g.node(i, j);
                (sv.values()[k], sg[0].values()[k], sg[1].values()[k])
            } else {
                (
                    sv.value_at(x).unwrap_or(0.0),
                    sg[0].value_at(x).unwrap_or(0.0),
                    sg[1].value_at(x).unwrap_or(0.0),
                )
            };
            let y = [x[0] * inv, x[1] * inv];
            let chi = sol.chi_at(y);
            let chi0 = sol.chi0_at(y);
            out.push(u0.value(i, j) + eps * (chi[0] * g1 + chi[1] * g2 + chi0 * svx));
        }
    }
    DiscreteField::new(g, out, BoundaryTag::Free)
}

/// `θ_ε = 1` within `ε` of the boundary, `0` beyond `2ε`, smooth in between;
/// `|∇θ_ε| <= 2/ε`.
pub fn boundary_cutoff(eps: f64, m: usize) -> Result<DiscreteField> {
    if !(eps > 0.0 && 2.0 * eps < 0.5) {
        return Err(Error::config("boundary cutoff needs 0 < 2 eps < 1/2"));
    }
    let g = UniformGrid::unit_square(m);
    DiscreteField::from_fn(g, BoundaryTag::Free, |x| {
        let d = x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]);
        1.0 - smooth_step((d - eps) / eps)
    })
}

/// Norms of `φ_ε = ε θ_ε (χ^ε·∇u₀ + χ₀^ε u₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLayer {
    pub h1_norm: f64,
    pub l2_norm: f64,
}

/// Nodal gradient: central differences inside, one-sided on the edges.
fn nodal_gradient(u: &DiscreteField) -> Vec<Vec2> {
    let g = u.grid();
    let h = g.spacing;
    let (nx, ny) = (g.cells[0], g.cells[1]);
    let d = |lo: usize, hi: usize, vlo: f64, vhi: f64| (vhi - vlo) / ((hi - lo) as f64 * h);
    let mut out = Vec::with_capacity(g.node_count());
    for j in 0..=ny {
        for i in 0..=nx {
            let (il, ih) = (i.saturating_sub(1), (i + 1).min(nx));
            let (jl, jh) = (j.saturating_sub(1), (j + 1).min(ny));
            out.push([
                d(il, ih, u.value(il, j), u.value(ih, j)),
                d(jl, jh, u.value(i, jl), u.value(i, jh)),
            ]);
        }
    }
    out
}

/// `φ_ε` on the `m x m` grid, with `u₀` and its nodal gradient interpolated.
pub fn boundary_layer_field(u0: &DiscreteField, sol: &CellSolution, eps: f64, m: usize) -> Result<DiscreteField> {
    let theta = boundary_cutoff(eps, m)?;
    let grad = nodal_gradient(u0);
    let gg = *u0.grid();
    let gx = DiscreteField::new(gg, grad.iter().map(|v| v[0]).collect(), BoundaryTag::Free)?;
    let gy = DiscreteField::new(gg, grad.iter().map(|v| v[1]).collect(), BoundaryTag::Free)?;
    let g = *theta.grid();
    let inv = 1.0 / eps;
    let mut vals = Vec::with_capacity(g.node_count());
    for j in 0..=m {
        for i in 0..=m {
            let x = g.coord(i, j);
            let t = theta.value(i, j);
            if t == 0.0 {
                vals.push(0.0);
                continue;
            }
            let y = [x[0] * inv, x[1] * inv];
            let chi = sol.chi_at(y);
            let miss = || Error::config("u0 grid does not cover the unit square");
            let w = chi[0] * gx.value_at(x).ok_or_else(miss)?
                + chi[1] * gy.value_at(x).ok_or_else(miss)?
                + sol.chi0_at(y) * u0.value_at(x).ok_or_else(miss)?;
            vals.push(eps * t * w);
        }
    }
    DiscreteField::new(g, vals, BoundaryTag::Free)
}

pub fn boundary_layer_indicator(u0: &DiscreteField, sol: &CellSolution, eps: f64, m: usize) -> Result<BoundaryLayer> {
    let phi = boundary_layer_field(u0, sol, eps, m)?;
    Ok(BoundaryLayer {
        h1_norm: phi.h1_norm(),
        l2_norm: phi.l2_norm(),
    })
}

fn unit_square_l2(vals: impl Iterator<Item = f64>, grid: &UniformGrid) -> Result<f64> {
    let f = DiscreteField::new(*grid, vals.collect(), BoundaryTag::Free)?;
    Ok(f.l2_norm())
}

/// `‖S_ε f - f‖_{L²(Ω)} / (ε ‖∇f‖_{L²(Ω)})` for an extended field.
pub fn smoothing_error_ratio(ext: &ExtendedField, eps: f64) -> Result<f64> {
    let m = ext.source_cells;
    let grid = UniformGrid::unit_square(m);
    let s = smooth(&ext.field, eps, &grid)?;
    let orig = ext.restriction();
    let err = unit_square_l2(s.values().iter().zip(&orig).map(|(a, b)| a - b), &grid)?;
    let f = DiscreteField::new(grid, orig, BoundaryTag::Free)?;
    Ok(err / (eps * f.h1_seminorm()))
}

/// `‖g^ε S_ε f‖_{L²(Ω)} / (‖g‖_{L²(Y)} ‖f‖_{L²(pad)})` with `g = ∂_k χ_j`
/// sampled at `x/ε`.
pub fn convolution_bound_ratio(sol: &CellSolution, j: usize, k: usize, ext: &ExtendedField, eps: f64) -> Result<f64> {
    if j > 1 || k > 1 {
        return Err(Error::config("corrector and derivative indices must be 0 or 1"));
    }
    let m = ext.source_cells;
    let grid = UniformGrid::unit_square(m);
    let s = smooth(&ext.field, eps, &grid)?;
    let cell = sol.grid();
    let chi = sol.chi(j);
    let inv = 1.0 / eps;
    let prod = (0..=m).flat_map(|jj| (0..=m).map(move |ii| (ii, jj))).map(|(ii, jj)| {
        let x = grid.coord(ii, jj);
        // Sample just inside the element to the upper right so the
        // piecewise-constant derivative is well defined.
        let y = [(x[0] + 0.5 * grid.spacing) * inv, (x[1] + 0.5 * grid.spacing) * inv];
        cell.interpolate_gradient(chi, y)[k] * s.value(ii, jj)
    });
    let num = unit_square_l2(prod, &grid)?;
    let g_cell = sqrt(sol.grad_chi(j).iter().map(|v| v[k] * v[k]).sum::<f64>() / sol.grad_chi(j).len() as f64);
    let f_pad = ext.field.l2_norm();
    if g_cell == 0.0 || f_pad == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (g_cell * f_pad))
}
