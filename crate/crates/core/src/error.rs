use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("objective evaluation is not finite while perturbing coordinate {coordinate}")]
    NonFiniteDifference { coordinate: usize },

    #[error("objective returned a negative value {0}")]
    NegativeObjective(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent constants: {0}")]
    InconsistentConstants(String),

    #[error("non-finite iterate at step {step}; the step size is too large for this landscape")]
    Divergence { step: usize },

    #[error("run {run_id} failed: {source}")]
    Run {
        run_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "acceptance rate {rate:.3e} is below {min:.0e} after {proposals} proposals; \
         use a smaller alpha_tilde"
    )]
    LowAcceptance { rate: f64, min: f64, proposals: u64 },

    #[error("every sampled pair was degenerate (distance below 1e-14)")]
    DegeneratePairs,

    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
