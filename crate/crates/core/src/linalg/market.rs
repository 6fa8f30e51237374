use core::fmt::{self, Write};

use super::CsrMatrix;

/// Writes the matrix in Matrix Market coordinate format (1-based indices).
pub fn write_matrix_market<W: Write>(m: &CsrMatrix, out: &mut W) -> fmt::Result {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (j, v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}
