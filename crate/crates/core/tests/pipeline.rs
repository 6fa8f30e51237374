use homog_core::approx::first_order_approx;
use homog_core::cell::{homogenized_coefficients, solve_correctors, PeriodicGrid};
use homog_core::fields::{benchmark_a0, benchmark_b, benchmark_v, laminate, CoefficientField, Expr};
use homog_core::rates::{error_h1, error_l2};
use homog_core::solver::{solve_homogenized, solve_oscillating, ProblemSpec};

fn benchmark() -> ProblemSpec {
    ProblemSpec::new(laminate(), benchmark_v(), benchmark_b(), benchmark_a0(), 0.0, Expr::constant(1.0)).unwrap()
}

#[test]
fn benchmark_homogenized_coefficients() {
    let spec = benchmark();
    assert!((spec.mu() - 1.875).abs() < 1e-14);
    let sol = solve_correctors(spec.a(), spec.v(), &PeriodicGrid::new(64).unwrap()).unwrap();
    let hc = homogenized_coefficients(spec.a(), spec.v(), spec.b(), spec.a0(), spec.mu(), &sol).unwrap();
    assert!(sol.chi0_sup() < 1e-12);
    assert!(hc.b_hat.iter().chain(hc.v_hat.iter()).all(|x| x.abs() < 1e-12));
    assert!((hc.a0_hat - 0.5).abs() < 1e-12);
    assert!((hc.a_hat[1][1] - 2.0).abs() < 1e-12);
    assert!((hc.a_hat[0][0] - 3f64.sqrt()).abs() < 1e-3);
}

#[test]
fn corrector_reduces_gradient_error() {
    let spec = benchmark();
    let eps = 0.25;
    let m = 128;
    let cell = PeriodicGrid::new((m as f64 * eps) as usize).unwrap();
    let sol = solve_correctors(spec.a(), spec.v(), &cell).unwrap();
    let hc = homogenized_coefficients(spec.a(), spec.v(), spec.b(), spec.a0(), spec.mu(), &sol).unwrap();
    let (u0, _) = solve_homogenized(&hc, spec.f(), m).unwrap();
    let (ue, rep) = solve_oscillating(&spec, eps, m).unwrap();
    assert!(rep.within_bound);
    let ve = first_order_approx(&u0, &sol, eps).unwrap();
    let plain = error_h1(&ue, &u0).unwrap();
    let corrected = error_h1(&ue, &ve).unwrap();
    assert!(corrected < 0.6 * plain, "corrected {corrected} vs plain {plain}");
    assert!(error_l2(&ue, &u0).unwrap() < 0.1 * u0.l2_norm());
}

#[test]
fn constant_coefficients_need_no_correction() {
    let spec = ProblemSpec::new(
        CoefficientField::identity(),
        CoefficientField::zero_vector(),
        CoefficientField::zero_vector(),
        CoefficientField::constant_scalar(1.0),
        0.0,
        Expr::constant(1.0),
    )
    .unwrap();
    let sol = solve_correctors(spec.a(), spec.v(), &PeriodicGrid::new(8).unwrap()).unwrap();
    let hc = homogenized_coefficients(spec.a(), spec.v(), spec.b(), spec.a0(), spec.mu(), &sol).unwrap();
    let (u0, _) = solve_homogenized(&hc, spec.f(), 32).unwrap();
    let (ue, _) = solve_oscillating(&spec, 0.5, 32).unwrap();
    assert!(error_h1(&ue, &u0).unwrap() < 1e-9);
}
