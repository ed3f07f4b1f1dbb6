use thiserror::Error;

/// Errors raised by the simulator, the convolution pipeline and the models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("qubit {0} used more than once in the same operation")]
    DuplicateQubit(usize),

    #[error("register size mismatch: expected {expected} qubits, found {found}")]
    QubitCountMismatch { expected: usize, found: usize },

    #[error("controlled phase order k must be >= 1, got {0}")]
    InvalidPhaseOrder(u32),

    #[error("amplitude vector of length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("state is not normalised: squared norm {0}")]
    NotNormalized(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("index map is not a bijection on {0} basis states")]
    InvalidPermutation(usize),

    #[error("post-selected branch has probability {0:e}")]
    ZeroProbabilityBranch(f64),

    #[error("cannot amplitude-encode an all-zero vector")]
    ZeroVector,

    #[error("qRAM address {0} has not been written")]
    MissingAddress(u64),

    #[error("degenerate spectrum: post-selection probability {0:e} is zero")]
    DegenerateSpectrum(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient for parameter {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("dataset error: {0}")]
    Dataset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
