use alloc::vec::Vec;

use super::{CsrMatrix, LinearSolveReport, SolveMethod};
use crate::error::{Error, Result};
use crate::math::l2_norm;

/// LU factorization with partial pivoting in band storage.
///
/// Entry `(i, j)` with `-(kl + ku) <= i - j <= kl` lives at
/// `ab[j * ldab + kl + ku + i - j]`; the extra `kl` super-diagonals hold the
/// fill created by row interchanges. Among candidate pivots of equal
/// magnitude the smallest row index wins.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::config("LU needs a square matrix"));
        }
        let (kl, ku) = m.bandwidths();
        let ldab = 2 * kl + ku + 1;
        let mut ab = alloc::vec![0.0; n * ldab];
        let off = kl + ku;
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                ab[j * ldab + off + i - j] += v;
            }
        }
        let amax = m.max_abs();
        let threshold = f64::EPSILON * amax;
        let mut piv = Vec::with_capacity(n);
        let at = |i: usize, j: usize| j * ldab + off + i - j;
        for k in 0..n {
            let last = (k + kl).min(n.saturating_sub(1));
            let mut p = k;
            let mut best = ab[at(k, k)].abs();
            for i in k + 1..=last {
                let v = ab[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold || amax == 0.0 {
                return Err(Error::Singular { pivot: k });
            }
            piv.push(p);
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    ab.swap(at(k, j), at(p, j));
                }
            }
            let pivot = ab[at(k, k)];
            for i in k + 1..=last {
                ab[at(i, k)] /= pivot;
            }
            for j in k + 1..=jmax {
                let akj = ab[at(k, j)];
                if akj != 0.0 {
                    for i in k + 1..=last {
                        let lik = ab[at(i, k)];
                        ab[at(i, j)] -= lik * akj;
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            piv,
        })
    }

    /// Row chosen as pivot at each elimination step.
    pub fn pivots(&self) -> &[usize] {
        &self.piv
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let off = kl + ku;
        let at = |i: usize, j: usize| j * ldab + off + i - j;
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.ab[at(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            x[k] /= self.ab[at(k, k)];
            let xk = x[k];
            if xk != 0.0 {
                for i in k.saturating_sub(kl + ku)..k {
                    x[i] -= self.ab[at(i, k)] * xk;
                }
            }
        }
        x
    }

    /// Solve followed by up to three rounds of iterative refinement; fails if
    /// the relative residual stays above `1e-10`.
    pub fn solve_refined(&self, m: &CsrMatrix, rhs: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        if rhs.len() != self.n {
            return Err(Error::config("LU solve: dimension mismatch"));
        }
        let bnorm = l2_norm(rhs);
        let mut x = self.solve(rhs);
        let mut rel = 0.0;
        let mut rounds = 0;
        for round in 0..4 {
            let ax = m.mul_vec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = if bnorm > 0.0 { l2_norm(&r) / bnorm } else { l2_norm(&r) };
            rounds = round;
            if rel <= 1e-13 || round == 3 {
                break;
            }
            let dx = self.solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        if rel > 1e-10 {
            return Err(Error::NonConvergence {
                iterations: rounds,
                residual: rel,
            });
        }
        Ok((
            x,
            LinearSolveReport {
                iterations: rounds,
                residual_norm: rel,
                method: SolveMethod::Lu,
            },
        ))
    }
}
