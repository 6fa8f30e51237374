//! Named coefficient fields used by tests, benchmarks and the CLI presets.

use super::{Basis, CoefficientField, Expr, GaussianTerm, Structure, TrigTerm};
use crate::math::Vec2;

fn cos1(coeff: f64, k: f64) -> TrigTerm {
    TrigTerm::new(coeff, [k, 0.0], [Basis::Cos, Basis::Cos])
}

/// `2 + cos 2πy₁`.
pub fn laminate_profile() -> Expr {
    Expr::constant(2.0).with(cos1(1.0, 1.0))
}

/// `(2 + cos 2πy₁) I` with `alpha = 1`, `beta = 3`.
pub fn laminate() -> CoefficientField {
    CoefficientField::isotropic(Structure::Periodic, laminate_profile(), 1.0, 3.0).expect("valid laminate")
}

/// `(2 + cos 2πy₁ cos 2πy₂) I` with `alpha = 1`, `beta = 3`.
pub fn checkerboard() -> CoefficientField {
    let a = Expr::constant(2.0).with(TrigTerm::new(1.0, [1.0, 1.0], [Basis::Cos, Basis::Cos]));
    CoefficientField::isotropic(Structure::Periodic, a, 1.0, 3.0).expect("valid checkerboard")
}

/// `cos 2πy₁`.
pub fn cos_mode() -> CoefficientField {
    CoefficientField::scalar(Structure::Periodic, Expr::from_terms(alloc::vec![cos1(1.0, 1.0)]), 1.0)
        .expect("valid mode")
}

/// `cos² 2πy₁ = 1/2 + cos(4πy₁)/2`.
pub fn cos_squared() -> CoefficientField {
    CoefficientField::scalar(
        Structure::Periodic,
        Expr::constant(0.5).with(cos1(0.5, 2.0)),
        1.0,
    )
    .expect("valid mode")
}

/// `cos 2πy₁ + cos 2√2πy₁`, almost periodic with mean zero.
pub fn almost_periodic_pair() -> CoefficientField {
    CoefficientField::scalar(
        Structure::AlmostPeriodic,
        Expr::from_terms(alloc::vec![cos1(1.0, 1.0), cos1(1.0, core::f64::consts::SQRT_2)]),
        2.0,
    )
    .expect("valid almost periodic field")
}

/// A pure Gaussian bump, filed as periodic-plus-decaying with zero periodic part.
pub fn gaussian_bump(amplitude: f64, center: Vec2, sigma: f64) -> CoefficientField {
    defect_scalar(Expr::zero(), amplitude, center, sigma)
}

/// `periodic + amplitude * exp(-|y - center|²/sigma²)`.
pub fn defect_scalar(periodic: Expr, amplitude: f64, center: Vec2, sigma: f64) -> CoefficientField {
    let bound: f64 = periodic.trig.iter().map(|t| t.coeff.abs()).sum::<f64>() + amplitude.abs();
    CoefficientField::scalar(
        Structure::PeriodicPlusDecaying,
        periodic.with_gaussian(GaussianTerm {
            amplitude,
            center,
            sigma,
        }),
        bound,
    )
    .expect("valid defect field")
}

/// Laminate plus an isotropic Gaussian bump at the origin. A non-negative
/// amplitude keeps `alpha = 1` and raises `beta` to `3 + amplitude`.
pub fn laminate_with_defect(amplitude: f64, sigma: f64) -> CoefficientField {
    let a = laminate_profile().with_gaussian(GaussianTerm {
        amplitude,
        center: [0.0, 0.0],
        sigma,
    });
    let alpha = if amplitude < 0.0 { 1.0 + amplitude } else { 1.0 };
    CoefficientField::isotropic(Structure::PeriodicPlusDecaying, a, alpha, 3.0 + amplitude.max(0.0))
        .expect("valid defect laminate")
}

/// Drift `V = (0.5 sin 2πy₂, 0)` of the rate benchmark.
pub fn benchmark_v() -> CoefficientField {
    CoefficientField::vector(
        Structure::Periodic,
        [
            Expr::from_terms(alloc::vec![TrigTerm::new(0.5, [0.0, 1.0], [Basis::Cos, Basis::Sin])]),
            Expr::zero(),
        ],
        0.5,
    )
    .expect("valid drift")
}

/// Drift `B = (0, 0.5 cos 2πy₁)` of the rate benchmark.
pub fn benchmark_b() -> CoefficientField {
    CoefficientField::vector(Structure::Periodic, [Expr::zero(), Expr::from_terms(alloc::vec![cos1(0.5, 1.0)])], 0.5)
        .expect("valid drift")
}

/// Potential `a0 = 0.5 + 0.25 sin 2πy₁` of the rate benchmark.
pub fn benchmark_a0() -> CoefficientField {
    CoefficientField::scalar(
        Structure::Periodic,
        Expr::constant(0.5).with(TrigTerm::new(0.25, [1.0, 0.0], [Basis::Sin, Basis::Cos])),
        0.75,
    )
    .expect("valid potential")
}
