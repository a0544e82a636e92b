use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // numerical
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("eigen-decomposition did not converge after {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("covariance is rank deficient (eigenvalue ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("zero-length vector")]
    ZeroVector,
    #[error("zero variance")]
    ZeroVariance,
    #[error("within-class covariance is singular")]
    SingularWithin,
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    // configuration / structure
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid dimension: {0}")]
    InvalidDim(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: key `{key}` expects {expected}, got `{value}`")]
    TypeError {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },

    // data
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty embedding file")]
    EmptySet,
    #[error("speaker `{0}` missing from speaker mean table")]
    UnknownSpeaker(String),
    #[error("trial references unknown id `{0}`")]
    UnknownTrialId(String),
    #[error("trial list needs at least one target and one nontarget trial")]
    DegenerateTrials,
    #[error("too few samples: need {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("duplicate utterance id `{0}`")]
    DuplicateUtteranceId(String),
    #[error("duplicate trial pair ({0}, {1})")]
    DuplicatePair(String, String),
    #[error("not enough pairs: requested {requested}, available {available}")]
    InsufficientPairs { requested: usize, available: usize },
    #[error("bad binary container: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            NotPositiveDefinite { .. }
            | NotSymmetric { .. }
            | ConvergenceFailure { .. }
            | NonFiniteLoss { .. }
            | RankDeficient { .. }
            | ZeroVariance
            | SingularWithin
            | DegenerateData(_) => 3,
            InvalidArchitecture(_)
            | InvalidDim(_)
            | InvalidConfig(_)
            | UnknownKey(_)
            | TypeError { .. } => 1,
            _ => 2,
        }
    }
}
