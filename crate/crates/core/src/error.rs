use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid map: {0}")]
    Map(String),

    #[error("demonstration generation failed: {0}")]
    Generation(String),

    /// The update produced a non-finite loss; the fields identify the regime it happened in.
    #[error(
        "non-finite loss during update (sigma = {sigma}, mean distance = {mean_distance}, bandwidth = {bandwidth})"
    )]
    NonFinite {
        sigma: f64,
        mean_distance: f64,
        bandwidth: f64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
