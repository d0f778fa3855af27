use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or contract file could not be parsed.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// A parsed value violates a model invariant.
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },

    #[error("operation needs at least one application (got n_apps = 0)")]
    NoApplications,

    #[error("user status {status:?} is inconsistent with attended = {attended}")]
    InconsistentStatus {
        status: crate::utility::UserStatus,
        attended: bool,
    },

    #[error("Monte Carlo sample count {got} is below the floor of {floor}")]
    TooFewSamples { got: usize, floor: usize },

    /// Every candidate contract violated at least one risk threshold or utility bound.
    #[error("no feasible contract: {0}")]
    NoFeasibleContract(String),

    #[error("cannot aggregate an empty outcome stream")]
    EmptyStream,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            key,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
