use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used by the command-line front end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numeric,
    Infeasible,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("layer {layer}: {message}")]
    Layer { layer: usize, message: String },

    #[error("malformed document: {0}")]
    Document(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("label at row {row} is {value}, expected 0 or 1")]
    NonBinaryLabel { row: usize, value: f64 },

    #[error("{0} is undefined when only one class is present")]
    SingleClass(&'static str),

    #[error("stale index: built for network {expected}, used with {found}")]
    StaleIndex { expected: String, found: String },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("csv row {row}, column `{column}`: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("lambda {lambda}: {source}")]
    Sweep {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite(_) | Error::Diverged { .. } => ErrorKind::Numeric,
            Error::Infeasible(_) => ErrorKind::Infeasible,
            Error::Sweep { source, .. } => source.kind(),
            _ => ErrorKind::Input,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Document(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let row = err
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        Error::Csv {
            row,
            column: String::new(),
            message: err.to_string(),
        }
    }
}
