use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid case: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid activation state: {0}")]
    InvalidState(String),

    #[error("invalid incentive model: {0}")]
    Model(String),

    #[error("hour {hour}: shedding did not converge within {iterations} iterations")]
    NonConvergence { hour: usize, iterations: usize },

    #[error("series has zero variance")]
    DegenerateSeries,

    #[error("bandwidth must be finite and > 0, got {0}")]
    InvalidBandwidth(f64),

    #[error("no interruptible scale up to {upper} removes all shedding at rationing level {rationing}")]
    NoFeasibleScale { rationing: f64, upper: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
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

    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
