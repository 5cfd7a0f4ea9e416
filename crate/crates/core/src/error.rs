use thiserror::Error;

/// Unified error type for the validation pipeline.
///
/// Errors are split into two broad classes: problems with user-supplied
/// input (files, configs, fingerprints) and problems that arise while
/// computing. The CLI maps the former to exit code 2 and the latter to 1.
#[derive(Debug, Error)]
pub enum Error {
    /// A case file line could not be parsed at all.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// A parsed record violates a schema or data invariant.
    #[error("invalid case '{case}', field '{field}': {detail}")]
    Validation {
        case: String,
        field: String,
        detail: String,
    },

    /// A run configuration is malformed or internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A requested metric conflicts with the declared problem fingerprint.
    #[error("fingerprint conflict: {0}")]
    Fingerprint(String),

    /// Operands passed to an operation do not fit together.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation received an empty collection it cannot handle.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A numeric routine failed (singular matrix, non-finite value, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    /// True when the error stems from user-supplied input rather than a
    /// failure inside the computation. Drives the CLI exit-code split.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation { .. }
                | Error::Config(_)
                | Error::Fingerprint(_)
                | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
