use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("no samples: input has a header but no data rows")]
    NoSamples,

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column:?}: cell {value:?} is not a finite number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid variable name list: {0}")]
    BadNames(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate column: zero variance")]
    DegenerateColumn,

    #[error("unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("graph contains a directed cycle")]
    Cyclic,

    #[error("invalid edge {0}")]
    BadEdge(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("rank-deficient conditioning set")]
    Singular,

    #[error("too few samples: need at least {needed}, have {have}")]
    TooFewSamples { needed: usize, have: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("test {test} failed on {x} vs {y} given {z:?}: {source}")]
    TestFailed {
        test: String,
        x: String,
        y: String,
        z: Vec<String>,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
