use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "observation point {observation} lies {distance:.3e} from dipole {dipole} (guard radius {guard:e})"
    )]
    Singularity {
        observation: usize,
        dipole: usize,
        distance: f64,
        guard: f64,
    },

    #[error("query ({x}, {y}) outside sampled region x in [{x_min}, {x_max}], y in [{y_min}, {y_max}]")]
    OutOfRange {
        x: f64,
        y: f64,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
