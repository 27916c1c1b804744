use thiserror::Error;

/// Errors produced by the model, the fitting pipeline and the file layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("degenerate fit: all quantum probabilities are zero")]
    DegenerateFit,

    #[error("non-positive CH denominator ({0:e}): no violation at any efficiency")]
    NonPositiveDenominator(f64),

    #[error("undefined diagnostic for `{0}`: predicted count is not positive")]
    UndefinedDiagnostic(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("validation error in {record}: {message}")]
    Validation { record: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn validation(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            record: record.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Parse { .. } | Error::Schema { .. } | Error::Io { .. } => 3,
            Error::InvalidArgument { .. } | Error::Validation { .. } => 4,
            Error::DegenerateFit
            | Error::NonPositiveDenominator(_)
            | Error::UndefinedDiagnostic(_) => 5,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
