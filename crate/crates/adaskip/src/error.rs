//! Error types shared across the crate.

use crate::model::SublayerRef;
use std::path::PathBuf;

/// Broad error class, used to pick the process exit code (validation = 2,
/// runtime = 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ---- validation ----
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid acceleration ratio {0}: must be >= 1")]
    InvalidRatio(f64),

    #[error("sublayer {0} is skipped but has no scale entry")]
    UnknownScale(SublayerRef),

    #[error("token {token} out of vocabulary (vocab_size {vocab_size})")]
    TokenOutOfVocab { token: u32, vocab_size: usize },

    #[error("input error: {0}")]
    InvalidInput(String),

    #[error("profile is incomplete: {0}")]
    IncompleteProfile(String),

    #[error("profiles are incompatible: {0}")]
    ProfileMismatch(String),

    #[error("cannot finalize statistics with zero recorded tokens")]
    EmptyStats,

    #[error("skip set is empty; threshold undefined, online extension disabled")]
    UndefinedThreshold,

    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),

    #[error("invalid k={k}: {reason}")]
    InvalidK { k: usize, reason: String },

    #[error("{path}:{line}: {message}")]
    TaskParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("task validation failed: {0}")]
    TaskValidation(String),

    #[error("calibration/evaluation task sets overlap: {0:?}")]
    CalibrationOverlap(Vec<String>),

    #[error("online window incomplete: {0}")]
    PrematureFinalize(String),

    #[error("online observation after finalization")]
    ObserveAfterFinalize,

    #[error("online window exceeded for {sublayer}: already holds {window} observations")]
    WindowExceeded { sublayer: SublayerRef, window: usize },

    #[error("bad weight file {path}: {reason}")]
    WeightFormat { path: PathBuf, reason: String },

    // ---- runtime ----
    #[error(
        "inconsistent plan: attention sublayer {sublayer} executed at position {position} \
         but its KV history holds {filled} entries"
    )]
    InconsistentPlan {
        sublayer: SublayerRef,
        position: usize,
        filled: usize,
    },

    #[error("task {id}: {source}")]
    TaskFailed {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InconsistentPlan { .. } | Error::Io { .. } | Error::Json { .. } => {
                ErrorCategory::Runtime
            }
            Error::TaskFailed { source, .. } => source.category(),
            _ => ErrorCategory::Validation,
        }
    }

    /// Process exit code for the CLI: 2 for validation errors, 3 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Validation => 2,
            ErrorCategory::Runtime => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_task(self, id: &str) -> Self {
        Error::TaskFailed {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
