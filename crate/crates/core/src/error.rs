use thiserror::Error;

/// Errors raised by the pruning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("eigenphase {phase:.12} lies within {tol:.1e} rad of the principal branch cut")]
    BranchAmbiguity { phase: f64, tol: f64 },

    #[error("eigendecomposition did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("invalid gate {id}: {reason}")]
    InvalidGate { id: usize, reason: String },

    #[error("gate {id} ({kind}) carries no parameter")]
    NotParameterized { id: usize, kind: String },

    #[error("state is not normalized (norm {norm:.12})")]
    NormViolation { norm: f64 },

    #[error("cannot normalize an all-zero vector")]
    ZeroVector,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (branch ambiguity, divergence, loss of
    /// unitarity) as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotUnitary { .. }
                | Error::BranchAmbiguity { .. }
                | Error::NoConvergence { .. }
                | Error::NormViolation { .. }
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
