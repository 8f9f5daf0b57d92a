use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    /// The actuator only accepts values that are members of the power table.
    #[error("transmit power {0} dBm is not a level of the power table")]
    OffGridTxp(f64),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("malformed config")]
    Config(#[from] toml::de::Error),

    #[error("could not serialize config")]
    ConfigWrite(#[from] toml::ser::Error),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("malformed summary")]
    Summary(#[from] serde_json::Error),

    #[error("{}: {cause}", path.display())]
    Io { path: PathBuf, cause: io::Error },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, cause: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Trace(e.to_string())
    }
}
