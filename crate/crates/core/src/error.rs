use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the unit box")]
    Domain { point: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate junction at {point:?}: smallest singular value {min_singular:.3e}")]
    DegenerateJunction { point: Vec<f64>, min_singular: f64 },

    #[error("time step {dt:.6e} exceeds the stable limit {limit:.6e}")]
    StepSize { dt: f64, limit: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("pure Neumann problem without a gauge: no Dirichlet nodes")]
    Gauge,

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateJunction { .. }
                | Error::StepSize { .. }
                | Error::Solver(_)
                | Error::Gauge
        )
    }
}
