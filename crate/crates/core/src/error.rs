//! Error type shared across the simulation pipeline.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EblError {
    /// A value failed an input contract; `field` names the offending field.
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    /// A shape is geometrically unusable (self-intersecting, out of bounds, ...).
    #[error("geometry error in shape `{shape}`: {message}")]
    Geometry { shape: String, message: String },

    /// Text-format parse failure with source position.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Binary payload does not match the documented format.
    #[error("format error: {message}")]
    Format { message: String },

    /// A numeric procedure failed (divergence, empty input, degenerate fit).
    #[error("numeric error: {message}")]
    Numeric { message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EblError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        EblError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn geometry(shape: impl Into<String>, message: impl Into<String>) -> Self {
        EblError::Geometry {
            shape: shape.into(),
            message: message.into(),
        }
    }

    pub fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        EblError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn format(message: impl Into<String>) -> Self {
        EblError::Format {
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        EblError::Numeric {
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EblError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code class: 1 validation, 2 runtime/numeric, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            EblError::Validation { .. } | EblError::Geometry { .. } | EblError::Parse { .. } => 1,
            EblError::Format { .. } | EblError::Numeric { .. } => 2,
            EblError::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, EblError>;
