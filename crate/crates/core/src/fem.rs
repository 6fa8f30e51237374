//! Bilinear (Q1) finite elements on uniform rectangular grids.
//!
//! Local node order on the reference square `[0, 1]²` is `(0,0), (1,0),
//! (0,1), (1,1)`; quadrature is the tensor 2x2 Gauss rule, point `q = 2 qy + qx`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::math::{Mat2, Vec2};

const G_LO: f64 = 0.5 - 0.288_675_134_594_812_9;
const G_HI: f64 = 0.5 + 0.288_675_134_594_812_9;

/// Gauss points on the reference square.
pub const GAUSS_POINTS: [Vec2; 4] = [[G_LO, G_LO], [G_HI, G_LO], [G_LO, G_HI], [G_HI, G_HI]];

#[inline]
pub fn shape(p: Vec2) -> [f64; 4] {
    let (x, y) = (p[0], p[1]);
    [(1.0 - x) * (1.0 - y), x * (1.0 - y), (1.0 - x) * y, x * y]
}

/// Reference-square gradients of the four shape functions.
#[inline]
pub fn shape_grad(p: Vec2) -> [Vec2; 4] {
    let (x, y) = (p[0], p[1]);
    [[-(1.0 - y), -(1.0 - x)], [1.0 - y, -x], [-y, 1.0 - x], [y, x]]
}

struct Tables {
    n: [[f64; 4]; 4],
    dn: [[Vec2; 4]; 4],
}

fn tables() -> Tables {
    let mut n = [[0.0; 4]; 4];
    let mut dn = [[[0.0; 2]; 4]; 4];
    for q in 0..4 {
        n[q] = shape(GAUSS_POINTS[q]);
        dn[q] = shape_grad(GAUSS_POINTS[q]);
    }
    Tables { n, dn }
}

/// Uniform grid of `cells[0] x cells[1]` square cells of side `spacing`.
/// Node `(i, j)` sits at `origin + (i, j) * spacing` with index
/// `j * (cells[0] + 1) + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub origin: Vec2,
    pub spacing: f64,
    pub cells: [usize; 2],
}

impl UniformGrid {
    /// `m x m` cells on the unit square.
    pub fn unit_square(m: usize) -> Self {
        UniformGrid {
            origin: [0.0, 0.0],
            spacing: 1.0 / m as f64,
            cells: [m, m],
        }
    }

    pub fn nodes_x(&self) -> usize {
        self.cells[0] + 1
    }

    pub fn nodes_y(&self) -> usize {
        self.cells[1] + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.nodes_x() + i
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> Vec2 {
        [
            self.origin[0] + i as f64 * self.spacing,
            self.origin[1] + j as f64 * self.spacing,
        ]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.cells[0] || j == self.cells[1]
    }

    pub fn extent(&self) -> [Vec2; 2] {
        [
            self.origin,
            [
                self.origin[0] + self.cells[0] as f64 * self.spacing,
                self.origin[1] + self.cells[1] as f64 * self.spacing,
            ],
        ]
    }

    /// Node indices of element `(ei, ej)` in local order.
    #[inline]
    pub fn element_nodes(&self, ei: usize, ej: usize) -> [usize; 4] {
        let n0 = self.node(ei, ej);
        let nx = self.nodes_x();
        [n0, n0 + 1, n0 + nx, n0 + nx + 1]
    }
}

/// Degree-of-freedom layout of an assembled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    /// `n x n` periodic cell of side 1; node `(i, j)` is dof `j n + i` with wrap.
    Periodic { n: usize },
    /// Homogeneous Dirichlet data on the boundary; interior nodes are dofs.
    Dirichlet(UniformGrid),
}

impl Topology {
    pub fn ndof(&self) -> usize {
        match self {
            Topology::Periodic { n } => n * n,
            Topology::Dirichlet(g) => (g.cells[0] - 1) * (g.cells[1] - 1),
        }
    }

    pub fn elements(&self) -> [usize; 2] {
        match self {
            Topology::Periodic { n } => [*n, *n],
            Topology::Dirichlet(g) => g.cells,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self {
            Topology::Periodic { n } => 1.0 / *n as f64,
            Topology::Dirichlet(g) => g.spacing,
        }
    }

    pub fn element_origin(&self, ei: usize, ej: usize) -> Vec2 {
        match self {
            Topology::Periodic { n } => [ei as f64 / *n as f64, ej as f64 / *n as f64],
            Topology::Dirichlet(g) => g.coord(ei, ej),
        }
    }

    #[inline]
    pub fn element_dofs(&self, ei: usize, ej: usize) -> [Option<usize>; 4] {
        match self {
            Topology::Periodic { n } => {
                let n = *n;
                let i1 = (ei + 1) % n;
                let j1 = (ej + 1) % n;
                [Some(ej * n + ei), Some(ej * n + i1), Some(j1 * n + ei), Some(j1 * n + i1)]
            }
            Topology::Dirichlet(g) => {
                let dof = |i: usize, j: usize| {
                    if g.is_boundary(i, j) {
                        None
                    } else {
                        Some((j - 1) * (g.cells[0] - 1) + (i - 1))
                    }
                };
                [dof(ei, ej), dof(ei + 1, ej), dof(ei, ej + 1), dof(ei + 1, ej + 1)]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Topology::Periodic { n } if *n < 3 => Err(Error::config("periodic grid needs n >= 3")),
            Topology::Dirichlet(g) if g.cells[0] < 2 || g.cells[1] < 2 => {
                Err(Error::config("Dirichlet grid needs at least 2 cells per edge"))
            }
            _ => Ok(()),
        }
    }

    /// Nine-point sparsity pattern.
    pub fn pattern(&self) -> Result<CsrMatrix> {
        self.validate()?;
        let nd = self.ndof();
        let mut rows: Vec<Vec<usize>> = (0..nd).map(|_| Vec::with_capacity(9)).collect();
        let [ex, ey] = self.elements();
        for ej in 0..ey {
            for ei in 0..ex {
                let dofs = self.element_dofs(ei, ej);
                for a in dofs.iter().flatten() {
                    for b in dofs.iter().flatten() {
                        rows[*a].push(*b);
                    }
                }
            }
        }
        CsrMatrix::from_pattern(nd, nd, rows)
    }
}

/// Quadrature point handed to coefficient callbacks.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub elem: [usize; 2],
    pub q: usize,
    /// Physical coordinates.
    pub x: Vec2,
}

/// Coefficients of `(A∇u + V u)·∇v + (B·∇u + c u) v` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCoeffs {
    pub a: Mat2,
    pub v: Vec2,
    pub b: Vec2,
    pub c: f64,
}

impl LocalCoeffs {
    pub fn diffusion(a: Mat2) -> Self {
        LocalCoeffs {
            a,
            v: [0.0, 0.0],
            b: [0.0, 0.0],
            c: 0.0,
        }
    }
}

fn for_each_quad(topo: &Topology, mut f: impl FnMut(usize, usize, [QuadPoint; 4])) {
    let [ex, ey] = topo.elements();
    let h = topo.spacing();
    for ej in 0..ey {
        for ei in 0..ex {
            let o = topo.element_origin(ei, ej);
            let qp = core::array::from_fn(|q| QuadPoint {
                elem: [ei, ej],
                q,
                x: [o[0] + GAUSS_POINTS[q][0] * h, o[1] + GAUSS_POINTS[q][1] * h],
            });
            f(ei, ej, qp);
        }
    }
}

/// Assembles `∫ (A∇u + V u)·∇v + (B·∇u + c u) v` with Dirichlet rows and
/// columns eliminated (or periodic wrap).
pub fn assemble_operator(topo: &Topology, coeffs: impl Fn(&QuadPoint) -> LocalCoeffs) -> Result<CsrMatrix> {
    let mut mat = topo.pattern()?;
    let t = tables();
    let h = topo.spacing();
    for_each_quad(topo, |ei, ej, qps| {
        let mut ke = [[0.0; 4]; 4];
        for (q, qp) in qps.iter().enumerate() {
            let k = coeffs(qp);
            let n = &t.n[q];
            let dn = &t.dn[q];
            for b in 0..4 {
                let flux = [
                    k.a[0][0] * dn[b][0] + k.a[0][1] * dn[b][1] + h * k.v[0] * n[b],
                    k.a[1][0] * dn[b][0] + k.a[1][1] * dn[b][1] + h * k.v[1] * n[b],
                ];
                let react = h * (k.b[0] * dn[b][0] + k.b[1] * dn[b][1]) + h * h * k.c * n[b];
                for a in 0..4 {
                    ke[a][b] += 0.25 * (flux[0] * dn[a][0] + flux[1] * dn[a][1] + react * n[a]);
                }
            }
        }
        let dofs = topo.element_dofs(ei, ej);
        for a in 0..4 {
            if let Some(ia) = dofs[a] {
                for b in 0..4 {
                    if let Some(ib) = dofs[b] {
                        mat.add_to(ia, ib, ke[a][b]);
                    }
                }
            }
        }
    });
    if !mat.all_finite() {
        return Err(Error::config("assembled matrix has non-finite entries"));
    }
    Ok(mat)
}

/// Consistent mass matrix `∫ u v`.
pub fn assemble_mass(topo: &Topology) -> Result<CsrMatrix> {
    assemble_operator(topo, |_| LocalCoeffs {
        a: [[0.0; 2]; 2],
        v: [0.0, 0.0],
        b: [0.0, 0.0],
        c: 1.0,
    })
}

/// Load vector `∫ f v`.
pub fn assemble_load(topo: &Topology, f: impl Fn(&QuadPoint) -> f64) -> Vec<f64> {
    let mut rhs = alloc::vec![0.0; topo.ndof()];
    let t = tables();
    let h = topo.spacing();
    for_each_quad(topo, |ei, ej, qps| {
        let dofs = topo.element_dofs(ei, ej);
        for (q, qp) in qps.iter().enumerate() {
            let fq = 0.25 * h * h * f(qp);
            for a in 0..4 {
                if let Some(ia) = dofs[a] {
                    rhs[ia] += fq * t.n[q][a];
                }
            }
        }
    });
    rhs
}

/// Load vector `-∫ H·∇v`, the weak form of `div H`.
pub fn assemble_flux_load(topo: &Topology, flux: impl Fn(&QuadPoint) -> Vec2) -> Vec<f64> {
    let mut rhs = alloc::vec![0.0; topo.ndof()];
    let t = tables();
    let h = topo.spacing();
    for_each_quad(topo, |ei, ej, qps| {
        let dofs = topo.element_dofs(ei, ej);
        for (q, qp) in qps.iter().enumerate() {
            let hq = flux(qp);
            for a in 0..4 {
                if let Some(ia) = dofs[a] {
                    rhs[ia] -= 0.25 * h * (hq[0] * t.dn[q][a][0] + hq[1] * t.dn[q][a][1]);
                }
            }
        }
    });
    rhs
}

/// Physical gradients at the four Gauss points from element nodal values.
#[inline]
pub fn element_gradients(values: [f64; 4], h: f64) -> [Vec2; 4] {
    core::array::from_fn(|q| {
        let dn = shape_grad(GAUSS_POINTS[q]);
        let mut g = [0.0, 0.0];
        for a in 0..4 {
            g[0] += values[a] * dn[a][0];
            g[1] += values[a] * dn[a][1];
        }
        [g[0] / h, g[1] / h]
    })
}

/// Element values at the four Gauss points.
#[inline]
pub fn element_values(values: [f64; 4]) -> [f64; 4] {
    core::array::from_fn(|q| {
        let n = shape(GAUSS_POINTS[q]);
        (0..4).map(|a| values[a] * n[a]).sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_functions_partition_unity() {
        for p in GAUSS_POINTS {
            let s: f64 = shape(p).iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            let g = shape_grad(p);
            let gx: f64 = g.iter().map(|v| v[0]).sum();
            assert!(gx.abs() < 1e-15);
        }
    }

    #[test]
    fn gauss_points_are_the_two_point_rule() {
        let d = 0.5 / libm::sqrt(3.0);
        assert!((G_HI - 0.5 - d).abs() < 1e-16);
    }

    #[test]
    fn dirichlet_laplacian_stencil() {
        let topo = Topology::Dirichlet(UniformGrid::unit_square(4));
        let k = assemble_operator(&topo, |_| LocalCoeffs::diffusion([[1.0, 0.0], [0.0, 1.0]])).unwrap();
        // Center interior node (2,2) is dof 4 of the 3x3 interior block.
        assert!((k.get(4, 4) - 8.0 / 3.0).abs() < 1e-14);
        for j in [0, 1, 2, 3, 5, 6, 7, 8] {
            assert!((k.get(4, j) + 1.0 / 3.0).abs() < 1e-14);
        }
        assert!(k.is_symmetric());
    }

    #[test]
    fn mass_matrix_integrates_one() {
        let topo = Topology::Periodic { n: 5 };
        let m = assemble_mass(&topo).unwrap();
        let ones = alloc::vec![1.0; 25];
        let total: f64 = m.mul_vec(&ones).iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gradients_of_linear_function_are_exact() {
        let h = 0.25;
        // u = 2x - 3y on an element with origin 0.
        let vals = [0.0, 2.0 * h, -3.0 * h, 2.0 * h - 3.0 * h];
        for g in element_gradients(vals, h) {
            assert!((g[0] - 2.0).abs() < 1e-14 && (g[1] + 3.0).abs() < 1e-14);
        }
    }
}
