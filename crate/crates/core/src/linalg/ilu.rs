use alloc::vec::Vec;

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Incomplete LU factorization with zero fill, stored on the pattern of the
/// source matrix (unit lower part below the diagonal, upper part on and above).
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let n = m.nrows();
        let mut lu = m.clone();
        let row_ptr = lu.row_ptr().to_vec();
        let col_idx = lu.col_idx().to_vec();
        let mut diag_pos = Vec::with_capacity(n);
        for i in 0..n {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            match cols.binary_search(&i) {
                Ok(k) => diag_pos.push(row_ptr[i] + k),
                Err(_) => return Err(Error::Singular { pivot: i }),
            }
        }
        let mut marker = alloc::vec![usize::MAX; n];
        let vals = lu.values_mut();
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                marker[col_idx[k]] = k;
            }
            for kk in row_ptr[i]..diag_pos[i] {
                let k = col_idx[kk];
                let pivot = vals[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(Error::Singular { pivot: k });
                }
                let lik = vals[kk] / pivot;
                vals[kk] = lik;
                for jj in diag_pos[k] + 1..row_ptr[k + 1] {
                    let pos = marker[col_idx[jj]];
                    if pos != usize::MAX {
                        vals[pos] -= lik * vals[jj];
                    }
                }
            }
            if vals[diag_pos[i]] == 0.0 {
                return Err(Error::Singular { pivot: i });
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                marker[col_idx[k]] = usize::MAX;
            }
        }
        Ok(Ilu0 { lu, diag_pos })
    }

    /// `z = (LU)⁻¹ r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        let n = r.len();
        for i in 0..n {
            let mut s = r[i];
            for k in rp[i]..self.diag_pos[i] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s / v[self.diag_pos[i]];
        }
    }
}
