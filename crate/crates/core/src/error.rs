use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, left is {left:?} and right is {right:?}")]
    Dimension {
        op: String,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("backward called on a tape that was already consumed; re-run the forward pass")]
    StaleTape,

    #[error(
        "forward pass is not deterministic: two baseline evaluations gave {first} and {second}"
    )]
    NonDeterministic { first: f64, second: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: schema error in field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dataset contains no samples")]
    EmptyDataset,

    #[error("document {0} is empty")]
    EmptyDocument(usize),

    #[error("document is empty after dropping tokens outside the vocabulary")]
    EmptyAfterFilter,

    #[error("{what} index {index} out of range (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {message}")]
    Divergence {
        epoch: usize,
        batch: usize,
        message: String,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: impl Into<String>, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension {
            op: op.into(),
            left,
            right,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Stage { source, .. } => source.kind(),
            Error::Divergence { .. } | Error::NonFinite(_) | Error::NonDeterministic { .. } => {
                ErrorKind::Numeric
            }
            Error::Precondition(_) | Error::Config(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}
