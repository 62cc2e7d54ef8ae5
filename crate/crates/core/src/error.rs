use thiserror::Error;

/// Errors raised by the probability primitives, solvers and realization tools.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("negative or non-finite probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("alphabet must contain at least one symbol")]
    EmptyAlphabet,

    #[error("source is not ergodic: {0}")]
    NotErgodic(String),

    #[error("reconstruction marginal vanishes on the whole tilted support at stage {stage}")]
    DegenerateMarginal { stage: usize },

    #[error("optimal kernel row {row} at stage {stage} has no mass after tilting")]
    DegenerateKernel { stage: usize, row: usize },

    #[error("singular parameters: {0}")]
    Singular(String),

    #[error("distortion target {target} is below the smallest achievable distortion {minimum}")]
    Infeasible { target: f64, minimum: f64 },

    #[error("observation sequence has zero probability at step {step}")]
    ImpossibleEvidence { step: usize },

    #[error("horizon {horizon} exceeds the enumerable limit {limit}")]
    HorizonTooLarge { horizon: usize, limit: usize },

    #[error("{}", config_message(.path.as_deref(), *.line, .message))]
    Config {
        path: Option<String>,
        line: Option<usize>,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn config_message(path: Option<&str>, line: Option<usize>, message: &str) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!("{p}:{l}: {message}"),
        (Some(p), None) => format!("{p}: {message}"),
        (None, Some(l)) => format!("line {l}: {message}"),
        (None, None) => message.to_string(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
