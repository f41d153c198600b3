use std::path::PathBuf;

use daereach::DaeError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}: {message}")]
    Parse { source_name: String, message: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Dae(#[from] DaeError),
}

impl CliError {
    pub fn parse(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Parse { source_name: source_name.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Machine-readable error class.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
            CliError::Dae(e) => match e {
                DaeError::InconsistentInitialSet(_) => "inconsistent-init",
                DaeError::IndexTooHigh => "index-too-high",
                DaeError::NonsingularE => "nonsingular-e",
                DaeError::IrregularPencil => "irregular",
                DaeError::NumericalFailure { .. } | DaeError::SingularMatrix { .. } => "numerical-failure",
                DaeError::DimensionMismatch { .. }
                | DaeError::NonFinite { .. }
                | DaeError::EmptyMatrix { .. }
                | DaeError::EmptyPredicate
                | DaeError::UnboundedPredicate
                | DaeError::InvalidArgument(_) => "invalid-input",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            "inconsistent-init" => 3,
            "index-too-high" | "nonsingular-e" => 4,
            "irregular" => 5,
            "numerical-failure" => 6,
            _ => 2,
        }
    }

    /// The one-line JSON document printed on stderr.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "error": self.class(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Dae(DaeError::InconsistentInitialSet(cert)) => {
                v["max_residual"] = json!(cert.max_residual);
                v["worst_column"] = json!(cert.worst_column);
                v["worst_block"] = json!(cert.worst_block);
            }
            CliError::Dae(DaeError::NumericalFailure { step: Some(step), .. }) => {
                v["step"] = json!(step);
            }
            _ => {}
        }
        v
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
