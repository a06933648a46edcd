//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a function precondition (non-finite input,
    /// non-positive extent, out-of-range parameter).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A vertex set could not be fitted to a rectangle.
    #[error("geometry: {0}")]
    Geometry(String),

    /// Inconsistent or out-of-range configuration.
    #[error("config: {0}")]
    Config(String),

    /// Malformed annotation or data file. `line` is 1-based; 0 means the
    /// error applies to the file as a whole.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// A JSON document carried an unknown or incompatible schema tag.
    #[error("schema: {0}")]
    Schema(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable kind tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Geometry(_) => "geometry",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Schema(_) => "schema",
            Error::Divergence { .. } => "divergence",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
