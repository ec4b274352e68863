use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the controllers, plant surrogate, analysis and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its admissible domain (non-finite, negative
    /// flow, dilution fraction outside (0, 1), ...).
    #[error("input out of domain: {0}")]
    InputDomain(String),

    /// A parameter set violates one of its invariants.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    /// A data structure reached a state its invariants forbid.
    #[error("structural error: {0}")]
    Structural(String),

    /// Least-squares estimation failed (rank deficient design, too few samples).
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Malformed input file.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("scenario error: {0}")]
    Scenario(String),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration or files, as
    /// opposed to faults raised while a simulation is running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParam { .. }
                | Error::Format { .. }
                | Error::Io { .. }
                | Error::Scenario(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InputDomain(format!(
            "{name} must be finite, got {value}"
        )))
    }
}
