//! The five subcommands. Each builds its inputs, computes, then hands every
//! file to a single [`Writer`].

use homog_core::cell::{homogenized_coefficients, solve_correctors_with, CellOptions, PeriodicGrid};
use homog_core::defect::{
    central_h1_change, decay_report, solve_defect_part_with, solve_periodic_part_with, DefectCorrector, DefectOptions,
};
use homog_core::fem::UniformGrid;
use homog_core::fields::{mean_value_with, validate_hypotheses, MeanValueOptions};
use homog_core::linalg::LinearSolveReport;
use homog_core::rates::{assemble_report, error_h1, error_l2, rate_row, validate_eps_list, RatePolicy};
use homog_core::solver::{solve_oscillating_with, BoundaryTag, DiscreteField, ProblemSpec, SolverOptions};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{expr, optional, KindSpec, ProblemConfig, RunConfig};
use crate::error::{warn, CliError};
use crate::output::{fit_json, rates_svg, Writer};

pub struct Context {
    pub config: RunConfig,
    pub writer: Writer,
    pub dry_run: bool,
}

impl Context {
    fn solver_options(&self) -> SolverOptions {
        let t = &self.config.tolerances;
        let d = SolverOptions::default();
        SolverOptions {
            tol: t.solver.unwrap_or(d.tol),
            max_iter: t.max_iter.unwrap_or(d.max_iter),
            ..d
        }
    }

    fn cell_tol(&self) -> f64 {
        self.config.tolerances.cell.unwrap_or(CellOptions::default().tol)
    }
}

fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    b.as_ref()
        .ok_or_else(|| CliError::config(format!("config has no `{name}` block")))
}

fn report_json(r: &LinearSolveReport) -> Value {
    json!({
        "method": format!("{:?}", r.method).to_lowercase(),
        "iterations": r.iterations,
        "residual_norm": r.residual_norm,
    })
}

fn problem(p: &ProblemConfig) -> Result<ProblemSpec, CliError> {
    Ok(ProblemSpec::new(
        p.a.build(KindSpec::Matrix)?,
        optional(&p.v, KindSpec::Vector)?,
        optional(&p.b, KindSpec::Vector)?,
        optional(&p.a0, KindSpec::Scalar)?,
        p.mu,
        expr(&p.f),
    )?)
}

pub fn cell(ctx: &mut Context) -> Result<(), CliError> {
    let c = block(&ctx.config.cell, "cell")?.clone();
    let a = c.a.build(KindSpec::Matrix)?;
    let v = optional(&c.v, KindSpec::Vector)?;
    let b = optional(&c.b, KindSpec::Vector)?;
    let a0 = optional(&c.a0, KindSpec::Scalar)?;
    for f in [&v, &b, &a0] {
        validate_hypotheses(f, 16, 8)?;
    }
    let grid = PeriodicGrid::new(c.n)?;
    if ctx.dry_run {
        println!("plan: cell solve on a {n}x{n} periodic grid, 3 corrector systems of {} unknowns", grid.node_count(), n = c.n);
        return Ok(());
    }
    println!("solving cell problems on a {n}x{n} grid", n = c.n);
    let opts = CellOptions {
        tol: ctx.cell_tol(),
        ..CellOptions::default()
    };
    let sol = solve_correctors_with(&a, &v, &grid, &opts)?;
    let hc = homogenized_coefficients(&a, &v, &b, &a0, c.mu, &sol)?;
    let (lo, hi) = hc.eigenvalues();
    println!("A_hat = {:?}", hc.a_hat);
    ctx.writer.json(
        "cell_solution.json",
        json!({
            "n": c.n,
            "h": grid.h(),
            "layout": "node (i, j) at index j * n + i, y = (i h, j h)",
            "chi1": sol.chi(0),
            "chi2": sol.chi(1),
            "chi0": sol.chi0(),
            "means": sol.means(),
            "sup_bound": sol.sup_bound(),
            "solves": sol.reports().iter().map(report_json).collect::<Vec<_>>(),
        }),
    );
    ctx.writer.json(
        "homogenized.json",
        json!({
            "A_hat": hc.a_hat,
            "B_hat": hc.b_hat,
            "V_hat": hc.v_hat,
            "a0_hat": hc.a0_hat,
            "mu": hc.mu,
            "eigenvalues": [lo, hi],
            "asymmetry": hc.asymmetry(),
        }),
    );
    Ok(())
}

pub fn solve(ctx: &mut Context) -> Result<(), CliError> {
    let c = block(&ctx.config.solve, "solve")?.clone();
    let spec = problem(&c.problem)?;
    if ctx.dry_run {
        println!(
            "plan: solve at eps={} on a {m}x{m} grid ({} unknowns), mu={}",
            c.eps,
            (c.m - 1) * (c.m - 1),
            spec.mu(),
            m = c.m
        );
        return Ok(());
    }
    println!("solving at eps={} on a {m}x{m} grid", c.eps, m = c.m);
    let (u, rep) = solve_oscillating_with(&spec, c.eps, c.m, &ctx.solver_options())?;
    let mut body = json!({
        "eps": c.eps,
        "m": c.m,
        "mu": spec.mu(),
        "mu0": spec.mu0(),
        "linear_solve": report_json(&rep.linear),
        "h1_norm": rep.h1_norm,
        "f_l2": rep.f_l2,
        "stability_constant": rep.stability_constant,
        "within_bound": rep.within_bound,
        "field": "u.json",
    });
    if let Some(exact) = &c.exact {
        let e = expr(exact);
        let reference = DiscreteField::from_fn(UniformGrid::unit_square(2 * c.m), BoundaryTag::Free, |x| e.eval(x))?;
        let l2 = error_l2(&u, &reference)?;
        let h1 = error_h1(&u, &reference)?;
        println!("L2 error vs analytic solution: {l2:.3e}");
        body["error_l2"] = json!(l2);
        body["error_h1"] = json!(h1);
    }
    if !rep.within_bound {
        warn("solution norm exceeds the stability bound");
    }
    ctx.writer.json("solve.json", body);
    ctx.writer.field("u", &u);
    Ok(())
}

pub fn rates(ctx: &mut Context) -> Result<(), CliError> {
    let c = block(&ctx.config.rates, "rates")?.clone();
    let spec = problem(&c.problem)?;
    let eps = validate_eps_list(&c.eps)?;
    let d = RatePolicy::default();
    let policy = RatePolicy {
        m_min: c.m_min.unwrap_or(d.m_min),
        cell_n: c.cell_n,
        discretization_budget: c.discretization_budget.unwrap_or(d.discretization_budget),
        solver: ctx.solver_options(),
        cell_tol: ctx.cell_tol(),
    };
    println!("eps        m_fine  cell_n  unknowns");
    for &e in &eps {
        let m = policy.fine_m(e);
        println!("{e:<9}  {m:<6}  {:<6}  {}", policy.cell_grid(e)?.n(), (m - 1) * (m - 1));
    }
    if ctx.dry_run {
        return Ok(());
    }
    let outcomes: Vec<_> = eps
        .par_iter()
        .map(|&e| {
            let row = rate_row(&spec, e, &policy);
            match &row {
                Ok(r) => println!("eps={e}: errL2={:.4e} errH1={:.4e}", r.err_l2_zero_order, r.err_h1_first_order),
                Err(err) => println!("eps={e}: failed: {err}"),
            }
            (e, row)
        })
        .collect();
    let mut report = assemble_report(outcomes, spec.stability_constant())?;
    report.config_digest = ctx.writer.digest().to_string();
    for (e, msg) in &report.failures {
        warn(&format!("row eps={e} failed: {msg}"));
    }
    let header = [
        "eps",
        "m_fine",
        "cell_n",
        "err_l2_zero_order",
        "err_h1_first_order",
        "err_h1_plain",
        "err_h1_first_order_interior",
        "norm_h1_ueps",
        "f_l2",
        "stability_ratio",
        "richardson_l2",
        "flagged",
        "boundary_layer_h1",
        "u0_h2",
    ];
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.eps.to_string(),
                r.m_fine.to_string(),
                r.cell_n.to_string(),
                format!("{:e}", r.err_l2_zero_order),
                format!("{:e}", r.err_h1_first_order),
                format!("{:e}", r.err_h1_plain),
                format!("{:e}", r.err_h1_first_order_interior),
                format!("{:e}", r.norm_h1_ueps),
                format!("{:e}", r.f_l2),
                format!("{:e}", r.stability_ratio()),
                format!("{:e}", r.richardson_l2),
                r.flagged.to_string(),
                r.boundary_layer_h1.map_or(String::new(), |v| format!("{v:e}")),
                format!("{:e}", r.u0_h2),
            ]
        })
        .collect();
    ctx.writer.csv("rates.csv", &header, &rows)?;
    let status = match &report.status {
        homog_core::rates::FitStatus::Fitted => json!("fitted"),
        homog_core::rates::FitStatus::Degenerate(msg) => json!({"degenerate": msg}),
        homog_core::rates::FitStatus::Insufficient { usable } => json!({"insufficient": {"usable": usable}}),
    };
    let json_rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "eps": r.eps,
                "m_fine": r.m_fine,
                "cell_n": r.cell_n,
                "err_l2_zero_order": r.err_l2_zero_order,
                "err_h1_first_order": r.err_h1_first_order,
                "err_h1_plain": r.err_h1_plain,
                "err_h1_first_order_interior": r.err_h1_first_order_interior,
                "norm_h1_ueps": r.norm_h1_ueps,
                "f_l2": r.f_l2,
                "stability_ratio": r.stability_ratio(),
                "richardson_l2": r.richardson_l2,
                "flagged": r.flagged,
                "boundary_layer_h1": r.boundary_layer_h1,
                "u0_h2": r.u0_h2,
                "a_hat": r.a_hat,
            })
        })
        .collect();
    ctx.writer.json(
        "rates.json",
        json!({
            "rows": json_rows,
            "failures": report.failures.iter().map(|(e, m)| json!({"eps": e, "error": m})).collect::<Vec<_>>(),
            "status": status,
            "slopes": {
                "l2_zero_order": fit_json(&report.slope_l2),
                "h1_first_order": fit_json(&report.slope_h1),
                "h1_plain": fit_json(&report.slope_h1_plain),
                "h1_first_order_interior": fit_json(&report.slope_h1_interior),
            },
            "corrector_necessary": report.corrector_necessary,
            "stability_spread": report.stability_spread,
            "stability_constant": report.stability_constant,
        }),
    );
    ctx.writer.text("rates.svg", rates_svg(&report));
    if let Some(f) = &report.slope_l2 {
        println!("L2 slope {:.3} (r^2 {:.4})", f.slope, f.r_squared);
    }
    if let Some(f) = &report.slope_h1 {
        println!("H1 first-order slope {:.3}", f.slope);
    }
    Ok(())
}

fn defect_json(dc: &DefectCorrector) -> Value {
    json!({
        "half_width": dc.half_width(),
        "n": dc.n(),
        "chi00_max_abs": dc.chi00().max_abs(),
        "residual": dc.residual(),
        "rhs_norm": dc.rhs_norm(),
        "total_energy": dc.total_energy(),
        "tail_fraction": dc.tail_fraction(),
        "linear_solve": report_json(dc.linear_report()),
        "decay_table": format!("decay_L{}.csv", dc.half_width()),
        "field": format!("chi00_L{}.json", dc.half_width()),
    })
}

pub fn defect(ctx: &mut Context) -> Result<(), CliError> {
    let c = block(&ctx.config.defect, "defect")?.clone();
    let a = c.a.build(KindSpec::Matrix)?;
    let v = optional(&c.v, KindSpec::Vector)?;
    if c.half_widths.is_empty() {
        return Err(CliError::config("`half_widths` must not be empty"));
    }
    let mut widths = c.half_widths.clone();
    widths.sort_unstable();
    widths.dedup();
    if ctx.dry_run {
        for &l in &widths {
            let cells = 2 * l * c.n;
            println!("plan: box [-{l}, {l}]^2, {cells}x{cells} elements, {} unknowns", (cells - 1) * (cells - 1));
        }
        return Ok(());
    }
    let opts = DefectOptions {
        box_tol: ctx.config.tolerances.solver.unwrap_or(DefectOptions::default().box_tol),
        cell_tol: ctx.config.tolerances.cell.unwrap_or(DefectOptions::default().cell_tol),
        ..DefectOptions::default()
    };
    println!("solving the periodic part with n={}", c.n);
    let per = solve_periodic_part_with(&a, &v, c.n, &opts)?;
    let solved: Vec<_> = widths
        .par_iter()
        .map(|&l| {
            println!("solving the defect part on [-{l}, {l}]^2");
            solve_defect_part_with(&a, &v, &per, l, c.n, &opts)
        })
        .collect::<Result<_, _>>()?;
    let mut changes = Vec::new();
    for w in solved.windows(2) {
        let change = central_h1_change(&w[0], &w[1], c.central_half)?;
        println!("central H1 change L={} -> {}: {:.3}%", w[0].half_width(), w[1].half_width(), 100.0 * change);
        changes.push(json!({"from": w[0].half_width(), "to": w[1].half_width(), "relative_change": change}));
    }
    ctx.writer.json(
        "defect.json",
        json!({
            "n": c.n,
            "central_half": c.central_half,
            "boxes": solved.iter().map(defect_json).collect::<Vec<_>>(),
            "central_h1_changes": changes,
        }),
    );
    for dc in &solved {
        let rows: Vec<Vec<String>> = decay_report(dc)
            .iter()
            .map(|r| {
                vec![
                    r.radius.to_string(),
                    format!("{:e}", r.annulus_energy),
                    format!("{:e}", r.tail_energy),
                    format!("{:e}", r.seminorm_estimate),
                ]
            })
            .collect();
        ctx.writer.csv(
            &format!("decay_L{}.csv", dc.half_width()),
            &["R", "annulus_energy", "tail_energy", "seminorm_estimate"],
            &rows,
        )?;
        ctx.writer.field(&format!("chi00_L{}", dc.half_width()), dc.chi00());
    }
    Ok(())
}

pub fn meanvalue(ctx: &mut Context) -> Result<(), CliError> {
    let c = block(&ctx.config.meanvalue, "meanvalue")?.clone();
    let field = c.field.build(KindSpec::Scalar)?;
    let d = MeanValueOptions::default();
    let opts = MeanValueOptions {
        points_per_unit: c.points_per_unit.unwrap_or(d.points_per_unit),
        tol: c.tol.unwrap_or(d.tol),
        periodic_shortcut: c.periodic_shortcut,
        ..d
    };
    if ctx.dry_run {
        println!("plan: {} nested squares up to R={}", c.levels, c.r_max);
        return Ok(());
    }
    let est = mean_value_with(&field, c.r_max, c.levels, &opts)?;
    println!("mean value {:.6e} (converged: {})", est.value, est.converged);
    if !est.converged {
        warn("mean value estimate has not converged");
    }
    ctx.writer.json(
        "meanvalue.json",
        json!({
            "value": est.value,
            "converged": est.converged,
            "radii": est.radii,
            "partials": est.partials,
        }),
    );
    Ok(())
}
