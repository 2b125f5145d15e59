use thiserror::Error;

/// Errors raised by the sampler and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameters handed to a density, schedule or sampler.
    #[error("configuration error: {0}")]
    Config(String),

    /// A covariance matrix could not be factorized, even after jitter.
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    /// Every log-weight is -inf: the ensemble has no mass on the posterior support.
    #[error("all importance weights are zero ({0})")]
    AllWeightsZero(String),

    /// The weight coefficient of variation decreased as beta increased.
    #[error("coefficient of variation is not monotone in beta: {0}")]
    NonMonotoneCov(String),

    /// The run did not reach beta = 1 within the stage cap.
    #[error("maximum number of stages ({0}) exceeded")]
    MaxStagesExceeded(usize),

    /// A density returned NaN or +inf, or a cached value is inconsistent.
    #[error("invalid log-density value: {0}")]
    InvalidLogDensity(String),

    /// Grid oracle boundary cells carry too much posterior mass.
    #[error("grid too small: boundary cells carry relative mass {0:e}")]
    GridTooSmall(f64),

    /// Operation invoked on an object in the wrong state.
    #[error("state error: {0}")]
    State(String),

    /// Serialization or parsing failure for ensemble / stage files.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
