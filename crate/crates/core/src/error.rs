use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the numerical core can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent or out-of-range configuration.
    Config(String),
    /// A coefficient field violates its declared ellipticity or sup-norm bounds.
    Hypothesis {
        message: String,
        point: Option<[f64; 2]>,
    },
    /// Triplet index outside the matrix shape.
    Assembly { row: usize, col: usize, shape: (usize, usize) },
    /// Iterative solver stopped before reaching the requested tolerance.
    NonConvergence { iterations: usize, residual: f64 },
    /// Direct factorization met a zero pivot.
    Singular { pivot: usize },
    /// Grid too coarse for the oscillation scale.
    UnderResolved { m: usize, eps: f64, required_m: usize },
    /// A localized defect reaches the boundary strip of the truncated box.
    Truncation(String),
    /// Convolution stencil leaves the padded source grid.
    Support(String),
    /// Log-log fit on zero, negative or non-finite data.
    DegenerateFit(String),
    /// Fewer data points than an operation requires.
    InsufficientData { got: usize, needed: usize },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn hypothesis(msg: impl Into<String>, point: Option<[f64; 2]>) -> Self {
        Error::Hypothesis {
            message: msg.into(),
            point,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Hypothesis { message, point } => match point {
                Some(p) => write!(f, "hypothesis violation at y=({}, {}): {message}", p[0], p[1]),
                None => write!(f, "hypothesis violation: {message}"),
            },
            Error::Assembly { row, col, shape } => write!(
                f,
                "assembly error: entry ({row}, {col}) outside {}x{} matrix",
                shape.0, shape.1
            ),
            Error::NonConvergence { iterations, residual } => write!(
                f,
                "solver did not converge after {iterations} iterations (relative residual {residual:e})"
            ),
            Error::Singular { pivot } => write!(f, "singular matrix: zero pivot in column {pivot}"),
            Error::UnderResolved { m, eps, required_m } => write!(
                f,
                "under-resolved grid: m={m} at eps={eps} gives fewer than 16 cells per period, need m >= {required_m}"
            ),
            Error::Truncation(msg) => write!(f, "truncation error: {msg}"),
            Error::Support(msg) => write!(f, "support error: {msg}"),
            Error::DegenerateFit(msg) => write!(f, "degenerate fit: {msg}"),
            Error::InsufficientData { got, needed } => {
                write!(f, "insufficient data: {got} points, need at least {needed}")
            }
        }
    }
}

impl core::error::Error for Error {}
