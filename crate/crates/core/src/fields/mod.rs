//! Closed-form coefficient fields `A`, `V`, `B`, `a0` over the plane.
//!
//! A field is a trigonometric polynomial per component plus optional Gaussian
//! bumps. Its structure tag records which averaging algebra it belongs to and
//! is checked against the terms at construction.

mod catalog;
mod expr;
mod mean;

use alloc::boxed::Box;
use alloc::vec::Vec;

pub use catalog::*;
pub use expr::{Basis, Expr, GaussianTerm, TrigTerm};
pub use mean::{
    besicovitch_seminorm, mean_value, mean_value_with, nested_average, nested_mean_value,
    MeanValueEstimate, MeanValueOptions,
};

use crate::error::{Error, Result};
use crate::math::{cos, sin, sqrt, Mat2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Matrix,
    Vector,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Constant,
    Periodic,
    PeriodicPlusDecaying,
    AlmostPeriodic,
}

/// Value of a field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Matrix(Mat2),
    Vector(Vec2),
    Scalar(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    kind: FieldKind,
    structure: Structure,
    /// Row-major components: 4 for matrices, 2 for vectors, 1 for scalars.
    components: Vec<Expr>,
    alpha: Option<f64>,
    beta: Option<f64>,
    alpha0: Option<f64>,
}

impl CoefficientField {
    /// Matrix-valued field with ellipticity bounds `alpha <= A ξ·ξ / |ξ|² <= beta`.
    pub fn matrix(structure: Structure, entries: [[Expr; 2]; 2], alpha: f64, beta: f64) -> Result<Self> {
        let [[a11, a12], [a21, a22]] = entries;
        if !(alpha > 0.0 && beta >= alpha && beta.is_finite()) {
            return Err(Error::config("matrix field needs 0 < alpha <= beta < inf"));
        }
        Self::build(
            FieldKind::Matrix,
            structure,
            alloc::vec![a11, a12, a21, a22],
            Some(alpha),
            Some(beta),
            None,
        )
    }

    /// `a(y) I`.
    pub fn isotropic(structure: Structure, a: Expr, alpha: f64, beta: f64) -> Result<Self> {
        Self::matrix(structure, [[a.clone(), Expr::zero()], [Expr::zero(), a]], alpha, beta)
    }

    pub fn vector(structure: Structure, comps: [Expr; 2], alpha0: f64) -> Result<Self> {
        let [v1, v2] = comps;
        Self::check_alpha0(alpha0)?;
        Self::build(FieldKind::Vector, structure, alloc::vec![v1, v2], None, None, Some(alpha0))
    }

    pub fn scalar(structure: Structure, u: Expr, alpha0: f64) -> Result<Self> {
        Self::check_alpha0(alpha0)?;
        Self::build(FieldKind::Scalar, structure, alloc::vec![u], None, None, Some(alpha0))
    }

    pub fn identity() -> Self {
        Self::isotropic(Structure::Constant, Expr::constant(1.0), 1.0, 1.0).expect("identity is valid")
    }

    pub fn zero_vector() -> Self {
        Self::vector(Structure::Constant, [Expr::zero(), Expr::zero()], 0.0).expect("zero is valid")
    }

    pub fn zero_scalar() -> Self {
        Self::scalar(Structure::Constant, Expr::zero(), 0.0).expect("zero is valid")
    }

    pub fn constant_scalar(c: f64) -> Self {
        Self::scalar(Structure::Constant, Expr::constant(c), c.abs()).expect("finite constant")
    }

    pub fn constant_vector(v: Vec2) -> Self {
        Self::vector(
            Structure::Constant,
            [Expr::constant(v[0]), Expr::constant(v[1])],
            sqrt(v[0] * v[0] + v[1] * v[1]),
        )
        .expect("finite constant")
    }

    fn check_alpha0(alpha0: f64) -> Result<()> {
        if alpha0 >= 0.0 && alpha0.is_finite() {
            Ok(())
        } else {
            Err(Error::config("alpha0 must be finite and non-negative"))
        }
    }

    fn build(
        kind: FieldKind,
        structure: Structure,
        components: Vec<Expr>,
        alpha: Option<f64>,
        beta: Option<f64>,
        alpha0: Option<f64>,
    ) -> Result<Self> {
        let finite = components.iter().all(|e| {
            e.trig.iter().all(|t| t.coeff.is_finite() && t.freq.iter().all(|k| k.is_finite()))
                && e.gaussians.iter().all(|g| {
                    g.amplitude.is_finite() && g.center.iter().all(|c| c.is_finite()) && g.sigma > 0.0
                })
        });
        if !finite {
            return Err(Error::config("field terms must be finite with positive Gaussian widths"));
        }
        let any_gaussian = components.iter().any(|e| !e.gaussians.is_empty());
        let all_integer = components.iter().all(Expr::has_integer_freqs);
        let all_constant = components
            .iter()
            .all(|e| e.trig.iter().all(|t| t.freq == [0.0, 0.0]));
        let ok = match structure {
            Structure::Constant => !any_gaussian && all_constant,
            Structure::Periodic => !any_gaussian && all_integer,
            Structure::PeriodicPlusDecaying => any_gaussian && all_integer,
            Structure::AlmostPeriodic => !any_gaussian,
        };
        if !ok {
            return Err(Error::config(match structure {
                Structure::Constant => "constant structure admits only zero frequencies and no Gaussian terms",
                Structure::Periodic => "periodic structure admits only integer frequencies and no Gaussian terms",
                Structure::PeriodicPlusDecaying => {
                    "periodic_plus_decaying structure needs integer frequencies and at least one Gaussian term"
                }
                Structure::AlmostPeriodic => "almost_periodic structure admits no Gaussian terms",
            }));
        }
        Ok(CoefficientField {
            kind,
            structure,
            components,
            alpha,
            beta,
            alpha0,
        })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn alpha0(&self) -> Option<f64> {
        self.alpha0
    }

    /// True when every component is identically zero.
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    pub fn is_constant(&self) -> bool {
        self.components.iter().all(Expr::is_constant)
    }

    pub fn eval(&self, y: Vec2) -> FieldValue {
        match self.kind {
            FieldKind::Matrix => FieldValue::Matrix(self.mat(y)),
            FieldKind::Vector => FieldValue::Vector(self.vec(y)),
            FieldKind::Scalar => FieldValue::Scalar(self.components[0].eval(y)),
        }
    }

    pub fn matrix_at(&self, y: Vec2) -> Result<Mat2> {
        self.expect_kind(FieldKind::Matrix)?;
        Ok(self.mat(y))
    }

    pub fn vector_at(&self, y: Vec2) -> Result<Vec2> {
        self.expect_kind(FieldKind::Vector)?;
        Ok(self.vec(y))
    }

    pub fn scalar_at(&self, y: Vec2) -> Result<f64> {
        self.expect_kind(FieldKind::Scalar)?;
        Ok(self.components[0].eval(y))
    }

    pub(crate) fn expect_kind(&self, kind: FieldKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::config(alloc::format!(
                "expected a {kind:?} field, got a {:?} field",
                self.kind
            )))
        }
    }

    /// Unchecked matrix evaluation for hot loops; the kind has been verified.
    #[inline]
    pub(crate) fn mat(&self, y: Vec2) -> Mat2 {
        let c = &self.components;
        [[c[0].eval(y), c[1].eval(y)], [c[2].eval(y), c[3].eval(y)]]
    }

    #[inline]
    pub(crate) fn mat_periodic(&self, y: Vec2) -> Mat2 {
        let c = &self.components;
        [
            [c[0].eval_periodic(y), c[1].eval_periodic(y)],
            [c[2].eval_periodic(y), c[3].eval_periodic(y)],
        ]
    }

    #[inline]
    pub(crate) fn mat_decaying(&self, y: Vec2) -> Mat2 {
        let c = &self.components;
        [
            [c[0].eval_decaying(y), c[1].eval_decaying(y)],
            [c[2].eval_decaying(y), c[3].eval_decaying(y)],
        ]
    }

    #[inline]
    pub(crate) fn vec(&self, y: Vec2) -> Vec2 {
        [self.components[0].eval(y), self.components[1].eval(y)]
    }

    #[inline]
    pub(crate) fn vec_decaying(&self, y: Vec2) -> Vec2 {
        [self.components[0].eval_decaying(y), self.components[1].eval_decaying(y)]
    }

    #[inline]
    pub(crate) fn scal(&self, y: Vec2) -> f64 {
        self.components[0].eval(y)
    }

    /// The field with its Gaussian terms removed (`A_per`, `V_per`).
    pub fn periodic_part(&self) -> CoefficientField {
        let components: Vec<Expr> = self.components.iter().map(Expr::periodic_part).collect();
        let structure = match self.structure {
            Structure::PeriodicPlusDecaying => {
                if components.iter().all(|e| e.trig.iter().all(|t| t.freq == [0.0, 0.0])) {
                    Structure::Constant
                } else {
                    Structure::Periodic
                }
            }
            s => s,
        };
        CoefficientField {
            kind: self.kind,
            structure,
            components,
            alpha: self.alpha,
            beta: self.beta,
            alpha0: self.alpha0,
        }
    }

    /// Only the Gaussian terms (`A_0`, `V_0`). Carries no declared bounds: the
    /// decaying part of an elliptic matrix is not elliptic itself.
    pub fn decaying_part(&self) -> CoefficientField {
        CoefficientField {
            kind: self.kind,
            structure: Structure::PeriodicPlusDecaying,
            components: self.components.iter().map(Expr::decaying_part).collect(),
            alpha: None,
            beta: None,
            alpha0: None,
        }
    }

    /// Column `j` of a matrix field as a vector field (`A e_j`).
    pub fn column(&self, j: usize) -> Result<CoefficientField> {
        self.expect_kind(FieldKind::Matrix)?;
        if j > 1 {
            return Err(Error::config("column index must be 0 or 1"));
        }
        Ok(CoefficientField {
            kind: FieldKind::Vector,
            structure: self.structure,
            components: alloc::vec![self.components[j].clone(), self.components[2 + j].clone()],
            alpha: None,
            beta: None,
            alpha0: self.beta,
        })
    }

    /// Every Gaussian term across all components.
    pub fn gaussians(&self) -> impl Iterator<Item = &GaussianTerm> {
        self.components.iter().flat_map(|e| e.gaussians.iter())
    }
}

/// Outcome of sampling a field against its declared hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub kind: FieldKind,
    pub samples: usize,
    pub probes: usize,
    /// Smallest Rayleigh quotient `A ξ·ξ` over samples and unit probes.
    pub min_rayleigh: Option<f64>,
    pub argmin: Option<Vec2>,
    pub max_rayleigh: Option<f64>,
    pub argmax: Option<Vec2>,
    /// Largest Euclidean norm (vectors) or absolute value (scalars).
    pub sup_norm: Option<f64>,
    pub argsup: Option<Vec2>,
    pub symmetric: bool,
    pub alpha_ok: bool,
    pub beta_ok: bool,
    pub alpha0_ok: bool,
    /// Same survey on the periodic part, for periodic_plus_decaying matrices.
    pub periodic_part: Option<Box<ValidationReport>>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.symmetric
            && self.alpha_ok
            && self.beta_ok
            && self.alpha0_ok
            && self.periodic_part.as_ref().map_or(true, |p| p.passed())
    }
}

fn lattice(field: &CoefficientField, lattice_n: usize) -> Vec<Vec2> {
    let mut pts = Vec::new();
    let block = |pts: &mut Vec<Vec2>, origin: Vec2, len: f64, per_edge: usize| {
        let h = len / per_edge as f64;
        for j in 0..per_edge {
            for i in 0..per_edge {
                pts.push([origin[0] + i as f64 * h, origin[1] + j as f64 * h]);
            }
        }
    };
    match field.structure {
        Structure::AlmostPeriodic => block(&mut pts, [0.0, 0.0], 4.0, 4 * lattice_n),
        _ => block(&mut pts, [0.0, 0.0], 1.0, lattice_n),
    }
    for g in field.gaussians() {
        let half = 3.0 * g.sigma;
        let per_edge = lattice_n.max(16);
        block(&mut pts, [g.center[0] - half, g.center[1] - half], 2.0 * half, per_edge);
        pts.push(g.center);
    }
    pts
}

fn probe_directions(probes: usize) -> Vec<Vec2> {
    (0..probes)
        .map(|k| {
            let t = core::f64::consts::PI * k as f64 / probes as f64;
            [cos(t), sin(t)]
        })
        .collect()
}

/// Samples the field on a lattice and records extreme Rayleigh quotients and
/// sup norms without failing on violations.
pub fn survey_hypotheses(field: &CoefficientField, lattice_n: usize, probes: usize) -> Result<ValidationReport> {
    survey_with(field, lattice_n, probes, true, CoefficientField::eval)
}

fn survey_with(
    field: &CoefficientField,
    lattice_n: usize,
    probes: usize,
    check_periodic_part: bool,
    eval: fn(&CoefficientField, Vec2) -> FieldValue,
) -> Result<ValidationReport> {
    if lattice_n < 8 {
        return Err(Error::config("validation lattice needs at least 8 points per edge"));
    }
    if probes < 4 {
        return Err(Error::config("validation needs at least 4 probe directions"));
    }
    let pts = lattice(field, lattice_n);
    let mut dirs = probe_directions(probes);
    // Axes and diagonals are always probed.
    let s = core::f64::consts::FRAC_1_SQRT_2;
    for d in [[1.0, 0.0], [0.0, 1.0], [s, s], [s, -s]] {
        if !dirs.iter().any(|p| (p[0] - d[0]).abs() < 1e-12 && (p[1] - d[1]).abs() < 1e-12) {
            dirs.push(d);
        }
    }
    let mut report = ValidationReport {
        kind: field.kind,
        samples: pts.len(),
        probes: dirs.len(),
        min_rayleigh: None,
        argmin: None,
        max_rayleigh: None,
        argmax: None,
        sup_norm: None,
        argsup: None,
        symmetric: true,
        alpha_ok: true,
        beta_ok: true,
        alpha0_ok: true,
        periodic_part: None,
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sup = 0.0f64;
    for &y in &pts {
        match eval(field, y) {
            FieldValue::Matrix(a) => {
                let scale = a[0][0].abs().max(a[1][1].abs()).max(1.0);
                if (a[0][1] - a[1][0]).abs() > 1e-14 * scale {
                    if report.symmetric {
                        report.argmin = Some(y);
                    }
                    report.symmetric = false;
                }
                for d in &dirs {
                    let q = d[0] * (a[0][0] * d[0] + a[0][1] * d[1]) + d[1] * (a[1][0] * d[0] + a[1][1] * d[1]);
                    if q < lo {
                        lo = q;
                        report.argmin = Some(y);
                    }
                    if q > hi {
                        hi = q;
                        report.argmax = Some(y);
                    }
                }
            }
            FieldValue::Vector(v) => {
                let n = sqrt(v[0] * v[0] + v[1] * v[1]);
                if n > sup || report.argsup.is_none() {
                    sup = sup.max(n);
                    report.argsup = Some(y);
                }
            }
            FieldValue::Scalar(u) => {
                if u.abs() > sup || report.argsup.is_none() {
                    sup = sup.max(u.abs());
                    report.argsup = Some(y);
                }
            }
        }
    }
    const SLACK: f64 = 1e-12;
    match field.kind {
        FieldKind::Matrix => {
            report.min_rayleigh = Some(lo);
            report.max_rayleigh = Some(hi);
            if let Some(alpha) = field.alpha {
                report.alpha_ok = lo >= alpha - SLACK * alpha.abs().max(1.0);
            }
            if let Some(beta) = field.beta {
                report.beta_ok = hi <= beta + SLACK * beta.abs().max(1.0);
            }
            if check_periodic_part && field.structure == Structure::PeriodicPlusDecaying && field.alpha.is_some() {
                let per = survey_with(field, lattice_n, probes, false, |f, y| {
                    FieldValue::Matrix(f.mat_periodic(y))
                })?;
                report.periodic_part = Some(Box::new(per));
            }
        }
        _ => {
            report.sup_norm = Some(sup);
            if let Some(a0) = field.alpha0 {
                report.alpha0_ok = sup <= a0 + SLACK * a0.max(1.0);
            }
        }
    }
    Ok(report)
}

/// Checks the declared bounds on a sampling lattice with `lattice_n` points per
/// unit edge and `probes` unit directions (axes and diagonals always added).
///
/// Returns the report when every bound holds, or a hypothesis error naming the
/// offending sample point.
pub fn validate_hypotheses(field: &CoefficientField, lattice_n: usize, probes: usize) -> Result<ValidationReport> {
    match field.kind {
        FieldKind::Matrix if field.alpha.is_none() || field.beta.is_none() => {
            return Err(Error::config("matrix field has no declared alpha/beta"))
        }
        FieldKind::Vector | FieldKind::Scalar if field.alpha0.is_none() => {
            return Err(Error::config("field has no declared alpha0"))
        }
        _ => {}
    }
    let report = survey_hypotheses(field, lattice_n, probes)?;
    if !report.symmetric {
        return Err(Error::hypothesis("matrix is not symmetric", report.argmin));
    }
    if !report.alpha_ok {
        return Err(Error::hypothesis(
            alloc::format!(
                "min Rayleigh quotient {} below declared alpha {}",
                report.min_rayleigh.unwrap_or(f64::NAN),
                field.alpha.unwrap_or(f64::NAN)
            ),
            report.argmin,
        ));
    }
    if !report.beta_ok {
        return Err(Error::hypothesis(
            alloc::format!(
                "max Rayleigh quotient {} above declared beta {}",
                report.max_rayleigh.unwrap_or(f64::NAN),
                field.beta.unwrap_or(f64::NAN)
            ),
            report.argmax,
        ));
    }
    if !report.alpha0_ok {
        return Err(Error::hypothesis(
            alloc::format!(
                "sup norm {} above declared alpha0 {}",
                report.sup_norm.unwrap_or(f64::NAN),
                field.alpha0.unwrap_or(f64::NAN)
            ),
            report.argsup,
        ));
    }
    if let Some(per) = &report.periodic_part {
        if !per.passed() {
            return Err(Error::hypothesis(
                "periodic part violates the declared ellipticity bounds",
                per.argmin,
            ));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_evaluates_to_identity() {
        let a = CoefficientField::identity();
        assert_eq!(a.matrix_at([0.3, 0.7]).unwrap(), [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn laminate_at_origin() {
        let a = laminate();
        assert_eq!(a.matrix_at([0.0, 0.0]).unwrap(), [[3.0, 0.0], [0.0, 3.0]]);
    }

    #[test]
    fn gaussian_defect_adds_peak_value() {
        let a = defect_scalar(Expr::constant(2.0), 1.0, [0.0, 0.0], 1.0);
        assert_eq!(a.scalar_at([0.0, 0.0]).unwrap(), 3.0);
        assert_eq!(a.periodic_part().scalar_at([0.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn kind_mismatch_is_config_error() {
        let a = CoefficientField::identity();
        assert!(matches!(a.vector_at([0.0, 0.0]), Err(Error::Config(_))));
        assert!(matches!(a.scalar_at([0.0, 0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn structure_tag_is_checked() {
        let e = Expr::constant(1.0).with(TrigTerm::new(1.0, [1.0, 0.0], [Basis::Cos, Basis::Cos]));
        assert!(CoefficientField::scalar(Structure::Constant, e.clone(), 2.0).is_err());
        assert!(CoefficientField::scalar(Structure::Periodic, e.clone(), 2.0).is_ok());
        let irr = Expr::from_terms(alloc::vec![TrigTerm::new(1.0, [core::f64::consts::SQRT_2, 0.0], [Basis::Cos, Basis::Cos])]);
        assert!(CoefficientField::scalar(Structure::Periodic, irr.clone(), 1.0).is_err());
        assert!(CoefficientField::scalar(Structure::AlmostPeriodic, irr, 1.0).is_ok());
        assert!(CoefficientField::scalar(Structure::PeriodicPlusDecaying, e, 2.0).is_err());
    }

    #[test]
    fn laminate_passes_with_tight_bounds() {
        let r = validate_hypotheses(&laminate(), 16, 8).unwrap();
        assert!((r.min_rayleigh.unwrap() - 1.0).abs() < 1e-14);
        assert!((r.max_rayleigh.unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn laminate_fails_when_alpha_too_large() {
        let a = CoefficientField::isotropic(Structure::Periodic, laminate_profile(), 1.5, 3.0).unwrap();
        match validate_hypotheses(&a, 16, 8) {
            Err(Error::Hypothesis { point: Some(p), .. }) => {
                assert!(cos(crate::math::TAU * p[0]) < -0.9, "point {p:?}");
            }
            other => panic!("expected hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn bounded_sine_drift_passes() {
        let v = CoefficientField::vector(
            Structure::Periodic,
            [
                Expr::from_terms(alloc::vec![TrigTerm::new(1.0, [0.0, 1.0], [Basis::Cos, Basis::Sin])]),
                Expr::zero(),
            ],
            1.0,
        )
        .unwrap();
        let r = validate_hypotheses(&v, 16, 4).unwrap();
        assert!(r.sup_norm.unwrap() <= 1.0);
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let a = CoefficientField::matrix(
            Structure::Constant,
            [[Expr::constant(2.0), Expr::constant(0.5)], [Expr::constant(0.0), Expr::constant(2.0)]],
            1.0,
            3.0,
        )
        .unwrap();
        assert!(matches!(validate_hypotheses(&a, 8, 4), Err(Error::Hypothesis { .. })));
    }

    #[test]
    fn defect_periodic_part_is_checked_separately() {
        // Periodic part spans [0.5, 1.5]; the bump only lifts the origin.
        let per = Expr::constant(1.0).with(TrigTerm::new(0.5, [1.0, 0.0], [Basis::Cos, Basis::Cos]));
        let a = CoefficientField::isotropic(
            Structure::PeriodicPlusDecaying,
            per.with_gaussian(GaussianTerm { amplitude: 0.1, center: [0.0, 0.0], sigma: 0.5 }),
            0.4,
            1.7,
        )
        .unwrap();
        let r = validate_hypotheses(&a, 16, 8).unwrap();
        assert!(r.periodic_part.is_some());
    }

    #[test]
    fn validation_is_deterministic() {
        let a = checkerboard();
        assert_eq!(validate_hypotheses(&a, 12, 6), validate_hypotheses(&a, 12, 6));
    }

    #[test]
    fn lattice_too_small_is_rejected() {
        assert!(matches!(validate_hypotheses(&laminate(), 4, 8), Err(Error::Config(_))));
        assert!(matches!(validate_hypotheses(&laminate(), 8, 2), Err(Error::Config(_))));
    }
}
