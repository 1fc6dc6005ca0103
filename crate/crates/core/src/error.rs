use thiserror::Error;

/// Errors raised by the simulator, the optimizers and the learning pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("gate acts on repeated qubit {0}")]
    DuplicateQubit(usize),

    #[error("register of {requested} qubits exceeds the {max}-qubit limit")]
    TooManyQubits { requested: usize, max: usize },

    #[error("gate references unbound parameter slot {0}")]
    UnboundParameter(usize),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("sample is degenerate: all features are zero after standardization")]
    DegenerateSample,

    #[error("analytic mode (shots = 0) cannot be combined with trajectory noise")]
    AnalyticWithNoise,

    #[error("objective returned a non-finite value {value} at evaluation {evaluation}")]
    NonFiniteObjective { value: f64, evaluation: usize },

    #[error("kernel matrix is not symmetric: |K[{i}][{j}] - K[{j}][{i}]| = {gap}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("label {0} is not in {{-1, +1}}")]
    InvalidLabel(i64),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
