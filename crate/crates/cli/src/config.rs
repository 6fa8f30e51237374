//! JSON run configuration and the coefficient-field schema.

use serde::{Deserialize, Serialize};

use homog_core::fields::{self, Basis, CoefficientField, Expr, GaussianTerm, Structure, TrigTerm};
use homog_core::Error;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub cell: Option<CellConfig>,
    #[serde(default)]
    pub solve: Option<SolveConfig>,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
    #[serde(default)]
    pub defect: Option<DefectConfig>,
    #[serde(default)]
    pub meanvalue: Option<MeanValueConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub cell: Option<f64>,
    pub solver: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub a: FieldSpec,
    #[serde(default)]
    pub v: Option<FieldSpec>,
    #[serde(default)]
    pub b: Option<FieldSpec>,
    #[serde(default)]
    pub a0: Option<FieldSpec>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "default_cell_n")]
    pub n: usize,
}

fn default_cell_n() -> usize {
    256
}

/// Coefficients and source shared by `solve` and `rates`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub a: FieldSpec,
    #[serde(default)]
    pub v: Option<FieldSpec>,
    #[serde(default)]
    pub b: Option<FieldSpec>,
    #[serde(default)]
    pub a0: Option<FieldSpec>,
    /// Raised to the coercivity shift when smaller.
    #[serde(default)]
    pub mu: f64,
    pub f: Vec<TermSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub problem: ProblemConfig,
    pub eps: f64,
    pub m: usize,
    /// Analytic solution for manufactured runs.
    #[serde(default)]
    pub exact: Option<Vec<TermSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub problem: ProblemConfig,
    pub eps: Vec<f64>,
    #[serde(default)]
    pub m_min: Option<usize>,
    #[serde(default)]
    pub cell_n: Option<usize>,
    #[serde(default)]
    pub discretization_budget: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectConfig {
    pub a: FieldSpec,
    #[serde(default)]
    pub v: Option<FieldSpec>,
    /// Cells per period.
    #[serde(default = "default_defect_n")]
    pub n: usize,
    /// Box half-widths `L`; two or more enable the doubling check.
    pub half_widths: Vec<usize>,
    #[serde(default = "default_central")]
    pub central_half: f64,
}

fn default_defect_n() -> usize {
    16
}

fn default_central() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanValueConfig {
    pub field: FieldSpec,
    pub r_max: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_true")]
    pub periodic_shortcut: bool,
    #[serde(default)]
    pub points_per_unit: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_levels() -> usize {
    4
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSpec {
    Matrix,
    Vector,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureSpec {
    Constant,
    Periodic,
    PeriodicPlusDecaying,
    AlmostPeriodic,
}

impl From<StructureSpec> for Structure {
    fn from(s: StructureSpec) -> Self {
        match s {
            StructureSpec::Constant => Structure::Constant,
            StructureSpec::Periodic => Structure::Periodic,
            StructureSpec::PeriodicPlusDecaying => Structure::PeriodicPlusDecaying,
            StructureSpec::AlmostPeriodic => Structure::AlmostPeriodic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSpec {
    Cos,
    Sin,
}

impl From<BasisSpec> for Basis {
    fn from(b: BasisSpec) -> Self {
        match b {
            BasisSpec::Cos => Basis::Cos,
            BasisSpec::Sin => Basis::Sin,
        }
    }
}

/// One additive term. Trig terms are `coeff * b1(2π k1 y1) * b2(2π k2 y2)`;
/// Gaussian terms are `amplitude * exp(-|y - center|² / sigma²)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermSpec {
    Trig {
        coeff: f64,
        #[serde(default)]
        freq: [f64; 2],
        #[serde(default = "default_basis")]
        basis: [BasisSpec; 2],
    },
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        sigma: f64,
    },
}

fn default_basis() -> [BasisSpec; 2] {
    [BasisSpec::Cos, BasisSpec::Cos]
}

/// A coefficient field, either a named preset or explicit terms.
///
/// Explicit fields give `terms` (a scalar, or the profile `a` of an isotropic
/// matrix `a I`) or `components` (row-major entries of a matrix or vector).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub kind: Option<KindSpec>,
    #[serde(default)]
    pub structure: Option<StructureSpec>,
    #[serde(default)]
    pub terms: Option<Vec<TermSpec>>,
    #[serde(default)]
    pub components: Option<Vec<Vec<TermSpec>>>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub alpha0: Option<f64>,
}

pub fn expr(terms: &[TermSpec]) -> Expr {
    let mut e = Expr::zero();
    for t in terms {
        e = match *t {
            TermSpec::Trig { coeff, freq, basis } => e.with(TrigTerm::new(coeff, freq, [basis[0].into(), basis[1].into()])),
            TermSpec::Gaussian {
                amplitude,
                center,
                sigma,
            } => e.with_gaussian(GaussianTerm {
                amplitude,
                center,
                sigma,
            }),
        };
    }
    e
}

fn preset(name: &str) -> Result<CoefficientField, CliError> {
    Ok(match name {
        "identity" => CoefficientField::identity(),
        "laminate" => fields::laminate(),
        "checkerboard" => fields::checkerboard(),
        "cos_mode" => fields::cos_mode(),
        "cos_squared" => fields::cos_squared(),
        "almost_periodic_pair" => fields::almost_periodic_pair(),
        "benchmark_v" => fields::benchmark_v(),
        "benchmark_b" => fields::benchmark_b(),
        "benchmark_a0" => fields::benchmark_a0(),
        "zero_vector" => CoefficientField::zero_vector(),
        "zero_scalar" => CoefficientField::zero_scalar(),
        other => return Err(CliError::config(format!("unknown preset `{other}`"))),
    })
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::config(format!("field is missing `{what}`")))
}

impl FieldSpec {
    pub fn build(&self, expected: KindSpec) -> Result<CoefficientField, CliError> {
        let field = if let Some(name) = &self.preset {
            if self.kind.is_some() || self.terms.is_some() || self.components.is_some() {
                return Err(CliError::config("`preset` excludes `kind`, `terms` and `components`"));
            }
            preset(name)?
        } else {
            self.explicit()?
        };
        let kind = match field.kind() {
            fields::FieldKind::Matrix => KindSpec::Matrix,
            fields::FieldKind::Vector => KindSpec::Vector,
            fields::FieldKind::Scalar => KindSpec::Scalar,
        };
        if kind != expected {
            return Err(CliError::config(format!("expected a {expected:?} field, got {kind:?}").to_lowercase()));
        }
        Ok(field)
    }

    fn explicit(&self) -> Result<CoefficientField, CliError> {
        let kind = need(self.kind, "kind")?;
        let structure: Structure = need(self.structure, "structure")?.into();
        let comps: Vec<Expr> = match (&self.terms, &self.components) {
            (Some(t), None) => vec![expr(t)],
            (None, Some(c)) => c.iter().map(|t| expr(t)).collect(),
            _ => return Err(CliError::config("give exactly one of `terms` and `components`")),
        };
        let built = match kind {
            KindSpec::Matrix => {
                let (alpha, beta) = (need(self.alpha, "alpha")?, need(self.beta, "beta")?);
                match comps.len() {
                    1 => CoefficientField::isotropic(structure, comps[0].clone(), alpha, beta),
                    4 => CoefficientField::matrix(
                        structure,
                        [[comps[0].clone(), comps[1].clone()], [comps[2].clone(), comps[3].clone()]],
                        alpha,
                        beta,
                    ),
                    n => Err(Error::Config(format!("matrix field needs 1 or 4 components, got {n}"))),
                }
            }
            KindSpec::Vector => {
                if comps.len() != 2 {
                    return Err(CliError::config("vector field needs 2 components"));
                }
                CoefficientField::vector(structure, [comps[0].clone(), comps[1].clone()], need(self.alpha0, "alpha0")?)
            }
            KindSpec::Scalar => {
                if comps.len() != 1 {
                    return Err(CliError::config("scalar field needs 1 component"));
                }
                CoefficientField::scalar(structure, comps[0].clone(), need(self.alpha0, "alpha0")?)
            }
        };
        Ok(built?)
    }
}

pub fn optional(spec: &Option<FieldSpec>, kind: KindSpec) -> Result<CoefficientField, CliError> {
    match spec {
        Some(s) => s.build(kind),
        None => Ok(match kind {
            KindSpec::Vector => CoefficientField::zero_vector(),
            KindSpec::Scalar => CoefficientField::zero_scalar(),
            KindSpec::Matrix => return Err(CliError::config("matrix field is required")),
        }),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    /// SHA-256 of the canonical (sorted-key) JSON form.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let value = serde_json::to_value(self).expect("config serializes");
        let bytes = serde_json::to_vec(&value).expect("value serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
