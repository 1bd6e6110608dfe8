use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested tolerance was not met. Carries the best available
    /// estimate so callers can decide whether it is usable.
    #[error("quadrature did not converge: best estimate {value:e} with error bound {error:e}")]
    NotConverged { value: f64, error: f64 },

    #[error("mode {mode}: {source}")]
    Mode {
        mode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_mode(self, mode: usize) -> Self {
        Error::Mode {
            mode,
            source: Box::new(self),
        }
    }
}
