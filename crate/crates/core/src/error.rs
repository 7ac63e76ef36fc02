use std::ops::Range;
use std::path::PathBuf;

use crate::Task;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: field `{field}`: {message}")]
    Record {
        line: usize,
        field: String,
        message: String,
    },

    #[error("duplicate report_id {report_id:?} on lines {first_line} and {second_line}")]
    DuplicateReportId {
        report_id: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("report {report_id:?}: empty report")]
    EmptyReport { report_id: String },

    #[error("report {report_id:?} has no {task} label")]
    MissingLabel { report_id: String, task: Task },

    #[error("empty kept class `{0}`")]
    EmptyKeptClass(String),

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("length mismatch: {preds} predictions vs {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("{task} tier failed on reports {first_report:?}..={last_report:?}: {source}")]
    Tier {
        task: Task,
        first_report: String,
        last_report: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the environment at run time (I/O, remote
    /// backends) rather than by invalid inputs or configuration.
    pub fn is_runtime(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Backend(_) => true,
            Error::Tier { source, .. } => source.is_runtime(),
            _ => false,
        }
    }

    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            Error::Backend(e) => Some(e),
            Error::Tier { source, .. } => source.backend_error(),
            _ => None,
        }
    }
}

/// Failure while scoring one batch on a classifier backend.
#[derive(Debug, thiserror::Error)]
#[error("backend {backend_id:?}, batch {}..{}: {kind}", batch.start, batch.end)]
pub struct BackendError {
    pub backend_id: String,
    /// Input index range of the failed batch.
    pub batch: Range<usize>,
    pub kind: BackendErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendErrorKind {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("non-success status {0}")]
    Status(u16),
    #[error("malformed response body: {0}")]
    MalformedBody(String),
    #[error("protocol error: expected {expected} scores, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("score {value} at position {index} is outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f64 },
    #[error("empty batch")]
    EmptyBatch,
}
