use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("predictor i/o error: {0}")]
    PredictorIo(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Training { step: usize, loss: f64 },

    #[error("cannot normalize coefficients: sum is {0}")]
    DegenerateNormalization(f64),

    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    #[error("{path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Usage and configuration problems map to exit status 2, everything
    /// else to 1.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Ingestion { .. } | Error::Io { .. } | Error::InvalidInput(_))
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite value {} at position {pos}", values[pos])));
    }
    Ok(())
}
