use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("graph already has a prior factor")]
    DuplicatePrior,
    #[error("graph is gauge-deficient: no prior, unary factor or fixed node")]
    GaugeDeficient,
    #[error("normal equations not positive definite after damping (lambda = {lambda:e})")]
    NotPositiveDefinite { lambda: f64 },
    #[error("frame {got} arrived after frame {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("no pose for anchor frame {0}")]
    MissingPose(u64),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
