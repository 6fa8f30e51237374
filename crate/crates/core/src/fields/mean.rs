//! Mean values `M(u) = lim |B_R|⁻¹ ∫_{B_R} u` and Besicovitch seminorms
//! `(M(|u|²))^{1/2}`, estimated on nested squares `[-R, R]²`.

use alloc::vec::Vec;

use super::{CoefficientField, FieldKind, Structure};
use crate::error::{Error, Result};
use crate::math::{ceil, sqrt, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct MeanValueEstimate {
    pub value: f64,
    pub radii: Vec<f64>,
    pub partials: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanValueOptions {
    /// Midpoint cells per unit length on the nested squares.
    pub points_per_unit: usize,
    /// Midpoint cells per edge for the single-cell periodic shortcut.
    pub cell_resolution: usize,
    /// Largest admissible gap between the last two partial averages.
    pub tol: f64,
    /// Use the single-cell integral for constant and periodic fields.
    pub periodic_shortcut: bool,
}

impl Default for MeanValueOptions {
    fn default() -> Self {
        MeanValueOptions {
            points_per_unit: 16,
            cell_resolution: 256,
            tol: 5e-3,
            periodic_shortcut: true,
        }
    }
}

/// Midpoint average of `f` over `[-R, R]²` for `R = r_max / 2^(levels-1-k)`.
pub fn nested_average(
    f: impl Fn(Vec2) -> f64,
    r_max: f64,
    levels: usize,
    points_per_unit: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(r_max >= 4.0 && r_max.is_finite()) {
        return Err(Error::config("mean value needs r_max >= 4"));
    }
    if levels < 3 {
        return Err(Error::config("mean value needs at least 3 levels"));
    }
    if points_per_unit == 0 {
        return Err(Error::config("points_per_unit must be positive"));
    }
    let mut radii = Vec::with_capacity(levels);
    let mut partials = Vec::with_capacity(levels);
    for k in 0..levels {
        let r = r_max / (1u64 << (levels - 1 - k)) as f64;
        let cells = (ceil(2.0 * r * points_per_unit as f64) as usize).max(1);
        let h = 2.0 * r / cells as f64;
        let mut total = 0.0;
        for j in 0..cells {
            let y2 = -r + (j as f64 + 0.5) * h;
            let mut row = 0.0;
            for i in 0..cells {
                row += f([-r + (i as f64 + 0.5) * h, y2]);
            }
            total += row;
        }
        radii.push(r);
        partials.push(total / (cells * cells) as f64);
    }
    Ok((radii, partials))
}

fn cell_average(f: impl Fn(Vec2) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut total = 0.0;
    for j in 0..n {
        let mut row = 0.0;
        for i in 0..n {
            row += f([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
        }
        total += row;
    }
    total / (n * n) as f64
}

fn estimate(
    field: &CoefficientField,
    f: impl Fn(Vec2) -> f64,
    r_max: f64,
    levels: usize,
    opts: &MeanValueOptions,
    shortcut: bool,
) -> Result<MeanValueEstimate> {
    field.expect_kind(FieldKind::Scalar)?;
    let periodic = matches!(field.structure(), Structure::Constant | Structure::Periodic);
    if shortcut && periodic {
        if !(r_max >= 4.0) || levels < 3 {
            return Err(Error::config("mean value needs r_max >= 4 and levels >= 3"));
        }
        let value = cell_average(&f, opts.cell_resolution.max(1));
        return Ok(MeanValueEstimate {
            value,
            radii: alloc::vec![r_max],
            partials: alloc::vec![value],
            converged: true,
        });
    }
    let (radii, partials) = nested_average(f, r_max, levels, opts.points_per_unit)?;
    let n = partials.len();
    let converged = (partials[n - 1] - partials[n - 2]).abs() <= opts.tol;
    Ok(MeanValueEstimate {
        value: partials[n - 1],
        radii,
        partials,
        converged,
    })
}

/// Mean value of a scalar field. Constant and periodic fields take the
/// single-cell shortcut; others are averaged on nested squares and flagged
/// `converged = false` when the last two partials disagree by more than `tol`.
pub fn mean_value(field: &CoefficientField, r_max: f64, levels: usize) -> Result<MeanValueEstimate> {
    mean_value_with(field, r_max, levels, &MeanValueOptions::default())
}

pub fn mean_value_with(
    field: &CoefficientField,
    r_max: f64,
    levels: usize,
    opts: &MeanValueOptions,
) -> Result<MeanValueEstimate> {
    estimate(field, |y| field.scal(y), r_max, levels, opts, opts.periodic_shortcut)
}

/// Mean value on nested squares only, bypassing the periodic shortcut.
pub fn nested_mean_value(field: &CoefficientField, r_max: f64, levels: usize) -> Result<MeanValueEstimate> {
    estimate(field, |y| field.scal(y), r_max, levels, &MeanValueOptions::default(), false)
}

/// `(M(|u|²))^{1/2}` through the same estimator applied to the squared field.
pub fn besicovitch_seminorm(field: &CoefficientField, r_max: f64, levels: usize) -> Result<f64> {
    let opts = MeanValueOptions::default();
    let est = estimate(
        field,
        |y| {
            let u = field.scal(y);
            u * u
        },
        r_max,
        levels,
        &opts,
        opts.periodic_shortcut,
    )?;
    Ok(sqrt(est.value.max(0.0)))
}
