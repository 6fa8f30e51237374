//! Exit codes and structured stderr diagnostics.

use std::fmt;

use homog_core::Error;
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Config(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 0 ok, 1 configuration, 2 hypothesis, 3 solver, 4 insufficient data.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Error::Hypothesis { .. } => 2,
                Error::NonConvergence { .. } | Error::Singular { .. } | Error::Assembly { .. } => 3,
                Error::InsufficientData { .. } | Error::DegenerateFit(_) => 4,
                Error::Config(_) | Error::UnderResolved { .. } | Error::Truncation(_) | Error::Support(_) => 1,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                Error::Config(_) => "config",
                Error::Hypothesis { .. } => "hypothesis",
                Error::Assembly { .. } => "assembly",
                Error::NonConvergence { .. } => "non_convergence",
                Error::Singular { .. } => "singular",
                Error::UnderResolved { .. } => "under_resolved",
                Error::Truncation(_) => "truncation",
                Error::Support(_) => "support",
                Error::DegenerateFit(_) => "degenerate_fit",
                Error::InsufficientData { .. } => "insufficient_data",
            },
        }
    }

    /// One-line JSON record for stderr.
    pub fn diagnostic(&self) -> String {
        let mut d = json!({
            "level": "error",
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Core(Error::Hypothesis { point: Some(p), .. }) = self {
            d["point"] = json!(p);
        }
        d.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

pub fn warn(message: &str) {
    eprintln!("{}", json!({"level": "warning", "message": message}));
}
