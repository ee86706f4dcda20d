use std::path::PathBuf;

use thiserror::Error;

use crate::taxonomy::ErrorType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("document {doc_id}: role {role:?} is not declared in the schema")]
    SchemaMismatch { doc_id: String, role: String },

    #[error("document {doc_id}: role {role:?} is {expected} in the schema but the corpus supplies {found}")]
    KindMismatch {
        doc_id: String,
        role: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("document {doc_id}: complexity guard exceeded ({what}: {count} > {cap})")]
    ComplexityGuardExceeded {
        doc_id: String,
        what: &'static str,
        count: String,
        cap: u64,
    },

    #[error("inconsistent transformation log: {0}")]
    InconsistentLog(String),

    #[error("transformation group matches no error type: {0}")]
    UnmappableSequence(String),

    #[error("infeasible injection spec for {error_type}: {reason}")]
    InfeasibleSpec { error_type: ErrorType, reason: String },

    #[error("reports cannot be compared: {0}")]
    IncompatibleReports(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, err: &serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
