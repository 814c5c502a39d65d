use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("instance too large: {qubits} qubits exceeds the limit of {max}")]
    TooManyQubits { qubits: usize, max: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid qubit index {index} for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid noise configuration: {0}")]
    InvalidNoiseConfig(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged {
        epoch: usize,
        /// Parameters from the last epoch whose loss was finite.
        last_finite_params: Vec<f64>,
    },

    #[error("certification requires t > 0")]
    TZero,

    #[error("no finite sample complexity: margin term {0} is not positive")]
    NoFiniteSampleComplexity(f64),

    #[error("{path}: {message}")]
    Dataset { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
