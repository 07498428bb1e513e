use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive integration (quadrature or ODE) did not reach its target.
    #[error("integration failed: {message} (best estimate magnitude {estimate:e}, error {error:e})")]
    Integration {
        message: String,
        estimate: f64,
        error: f64,
    },

    #[error("unsupported initial state: {0}")]
    UnsupportedState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A statistic that is undefined at the requested point, e.g. Mandel Q
    /// when the mean count is zero.
    #[error("statistic undefined: {0}")]
    UndefinedStatistic(String),

    /// Both measurement branches carry zero weight.
    #[error("degenerate conditional state at step {step}")]
    DegenerateState { step: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
