use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {0} is not a positive power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid qubit index set {indices:?} for {n_qubits} qubits")]
    InvalidQubits { indices: Vec<usize>, n_qubits: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("trace {0:.6} is not 1")]
    NotUnitTrace(f64),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("expectation has imaginary residue {0:.3e}")]
    ImaginaryTrace(f64),

    #[error("invalid outcome string {0:?}")]
    InvalidOutcome(String),

    #[error("POVM elements do not sum to identity (max deviation {0:.3e})")]
    Incomplete(f64),

    #[error("outcome probabilities sum to {0:.8}")]
    ProbabilitySum(f64),

    #[error("probe set is rank deficient (rank {rank} of {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("missing counts for probe {0:?}")]
    MissingCounts(String),

    #[error("unknown probe scheme {0:?}")]
    UnknownScheme(String),

    #[error("epsilon {0} outside [0, 1)")]
    InvalidEpsilon(f64),

    #[error("parameter {name} = {value} out of range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("trace {0:.3e} too small to normalize")]
    VanishingTrace(f64),

    #[error("{0}")]
    Unsupported(String),

    #[error("numerical check failed: {0}")]
    Validation(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
