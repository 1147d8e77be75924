use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A stateful source was queried against its contract (e.g. going back in time).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("cannot normalize: {0}")]
    CannotNormalize(String),

    #[error("bracket violation: f({t_lo}) = {f_lo} and f({t_hi}) = {f_hi} have the same sign")]
    BracketViolation { t_lo: f64, t_hi: f64, f_lo: f64, f_hi: f64 },

    #[error("integration fault at t = {t} s: {reason}")]
    IntegrationFault { t: f64, reason: String },

    /// Physically inconsistent combination of otherwise valid settings.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Scenario-file diagnostic, `path` is the dotted key path.
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("at r_load = {r_load} ohm: {source}")]
    AtLoad {
        r_load: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 1 for configuration problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Configuration(_) | Error::InvalidInput(_) => 1,
            Error::AtLoad { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
