use thiserror::Error;

/// Errors raised across the simulator and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of size {grid} cannot represent bandwidth {bandwidth} losslessly (need at least {required})")]
    Resolution {
        grid: usize,
        bandwidth: usize,
        required: usize,
    },

    #[error("conjugate symmetry violated at mode ({m1}, {m2}): deviation {deviation:e}")]
    Symmetry { m1: i64, m2: i64, deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("noise increment block {requested} already consumed (next unused block is {next})")]
    IncrementReused { requested: usize, next: usize },

    #[error("solution diverged at t = {time}: sup-norm {sup_norm:e} exceeds guard {guard:e}")]
    Divergence {
        time: f64,
        sup_norm: f64,
        guard: f64,
    },

    #[error("partition construction failed: {0}")]
    Partition(String),

    #[error("tail bound {tail:e} exceeds tolerance {tolerance:e} at truncation radius {radius}")]
    TailTolerance {
        tail: f64,
        tolerance: f64,
        radius: usize,
    },

    #[error("path {path} (seed {seed}) failed: {source}")]
    PathFailure {
        path: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
