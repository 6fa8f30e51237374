use alloc::vec::Vec;

use super::{dot, project_in_place, CsrMatrix, Ilu0, LinearSolveReport, SolveMethod};
use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    Ilu0,
}

#[derive(Debug, Clone, Copy)]
pub struct IterativeOptions<'a> {
    /// Relative residual target `‖b - Ax‖ <= tol ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
    /// Quadrature weights of a constant null space; when present the solve
    /// runs on the weighted zero-mean subspace.
    pub zero_mean_weights: Option<&'a [f64]>,
}

enum Precond {
    Jacobi(Vec<f64>),
    Ilu(Ilu0),
}

impl Precond {
    fn build(m: &CsrMatrix, kind: Preconditioner) -> Result<Self> {
        match kind {
            Preconditioner::Jacobi => {
                let d = m.diagonal();
                let inv = d.iter().map(|&x| if x != 0.0 { 1.0 / x } else { 1.0 }).collect();
                Ok(Precond::Jacobi(inv))
            }
            Preconditioner::Ilu0 => Ok(Precond::Ilu(Ilu0::factor(m)?)),
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Precond::Ilu(ilu) => ilu.apply(r, z),
        }
    }
}

fn euclidean_center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

fn residual(m: &CsrMatrix, x: &[f64], b: &[f64], r: &mut [f64]) {
    m.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

fn norm(v: &[f64]) -> f64 {
    sqrt(dot(v, v))
}

/// Preconditioned conjugate gradients. Deterministic: fixed iteration order,
/// sequential reductions.
pub fn conjugate_gradient(
    m: &CsrMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &IterativeOptions<'_>,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let n = m.nrows();
    if rhs.len() != n || m.ncols() != n {
        return Err(Error::config("conjugate gradient: dimension mismatch"));
    }
    let mut b = rhs.to_vec();
    if opts.zero_mean_weights.is_some() {
        euclidean_center(&mut b);
    }
    let project = |x: &mut [f64]| {
        if let Some(w) = opts.zero_mean_weights {
            project_in_place(x, w);
        }
    };
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => alloc::vec![0.0; n],
    };
    project(&mut x);
    let bnorm = norm(&b);
    if bnorm == 0.0 {
        let x = alloc::vec![0.0; n];
        return Ok((
            x,
            LinearSolveReport {
                iterations: 0,
                residual_norm: 0.0,
                method: SolveMethod::Cg,
            },
        ));
    }
    let pre = Precond::build(m, opts.preconditioner)?;
    let mut r = alloc::vec![0.0; n];
    let mut z = alloc::vec![0.0; n];
    let mut q = alloc::vec![0.0; n];
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        residual(m, &x, &b, &mut r);
        let true_rel = norm(&r) / bnorm;
        if true_rel <= opts.tol {
            return Ok((
                x,
                LinearSolveReport {
                    iterations,
                    residual_norm: true_rel,
                    method: SolveMethod::Cg,
                },
            ));
        }
        if iterations >= opts.max_iter || restarts > 8 {
            return Err(Error::NonConvergence {
                iterations,
                residual: true_rel,
            });
        }
        restarts += 1;
        pre.apply(&r, &mut z);
        if opts.zero_mean_weights.is_some() {
            euclidean_center(&mut z);
        }
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < opts.max_iter {
            m.mul_vec_into(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= 0.0 || !pq.is_finite() {
                break;
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            project(&mut x);
            iterations += 1;
            if norm(&r) <= opts.tol * bnorm {
                break;
            }
            pre.apply(&r, &mut z);
            if opts.zero_mean_weights.is_some() {
                euclidean_center(&mut z);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// Preconditioned BiCGStab for non-symmetric systems.
pub fn bicgstab(
    m: &CsrMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &IterativeOptions<'_>,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let n = m.nrows();
    if rhs.len() != n || m.ncols() != n {
        return Err(Error::config("bicgstab: dimension mismatch"));
    }
    let b = rhs;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            alloc::vec![0.0; n],
            LinearSolveReport {
                iterations: 0,
                residual_norm: 0.0,
                method: SolveMethod::BiCgStab,
            },
        ));
    }
    let pre = Precond::build(m, opts.preconditioner)?;
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => alloc::vec![0.0; n],
    };
    let mut r = alloc::vec![0.0; n];
    let mut p = alloc::vec![0.0; n];
    let mut v = alloc::vec![0.0; n];
    let mut phat = alloc::vec![0.0; n];
    let mut s = alloc::vec![0.0; n];
    let mut shat = alloc::vec![0.0; n];
    let mut t = alloc::vec![0.0; n];
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        residual(m, &x, b, &mut r);
        let true_rel = norm(&r) / bnorm;
        if true_rel <= opts.tol {
            return Ok((
                x,
                LinearSolveReport {
                    iterations,
                    residual_norm: true_rel,
                    method: SolveMethod::BiCgStab,
                },
            ));
        }
        if iterations >= opts.max_iter || restarts > 16 {
            return Err(Error::NonConvergence {
                iterations,
                residual: true_rel,
            });
        }
        restarts += 1;
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        p.iter_mut().for_each(|x| *x = 0.0);
        v.iter_mut().for_each(|x| *x = 0.0);
        while iterations < opts.max_iter {
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            pre.apply(&p, &mut phat);
            m.mul_vec_into(&phat, &mut v);
            let rv = dot(&r_hat, &v);
            if rv == 0.0 || !rv.is_finite() {
                break;
            }
            alpha = rho / rv;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            iterations += 1;
            if norm(&s) <= opts.tol * bnorm {
                for i in 0..n {
                    x[i] += alpha * phat[i];
                }
                break;
            }
            pre.apply(&s, &mut shat);
            m.mul_vec_into(&shat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                for i in 0..n {
                    x[i] += alpha * phat[i];
                }
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm(&r) <= opts.tol * bnorm || omega == 0.0 {
                break;
            }
        }
    }
}
