use thiserror::Error;

use crate::consistency::ConsistencyCertificate;

pub type Result<T> = std::result::Result<T, DaeError>;

#[derive(Debug, Clone, Error)]
pub enum DaeError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix {name} contains a non-finite entry at ({row}, {col})")]
    NonFinite {
        name: &'static str,
        row: usize,
        col: usize,
    },

    #[error("matrix {name} has an empty dimension ({rows}x{cols})")]
    EmptyMatrix {
        name: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("E is nonsingular: the system is an ODE, not a DAE")]
    NonsingularE,

    #[error("tractability index exceeds 3 (E_3 is still singular)")]
    IndexTooHigh,

    #[error("the matrix pencil (E, A) is not regular: det(sE - A) vanished at every sample point")]
    IrregularPencil,

    #[error("matrix {name} is singular at the rank tolerance")]
    SingularMatrix { name: &'static str },

    #[error(
        "initial set is inconsistent: max |Gamma V(0)| = {:.3e} (worst column {}, worst block {})",
        .0.max_residual, .0.worst_column, .0.worst_block
    )]
    InconsistentInitialSet(Box<ConsistencyCertificate>),

    #[error("star predicate C alpha <= d is empty")]
    EmptyPredicate,

    #[error("star predicate is unbounded; sampling requires a bounded polytope")]
    UnboundedPredicate,

    #[error("numerical failure{}: {reason}", .step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NumericalFailure { step: Option<usize>, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl DaeError {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        DaeError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn numerical(reason: impl Into<String>) -> Self {
        DaeError::NumericalFailure {
            step: None,
            reason: reason.into(),
        }
    }
}
