use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no root: {0}")]
    NoRoot(String),

    #[error("estimate too noisy: {0}")]
    NoisyEstimate(String),

    #[error("boundary moment overflow: {0}")]
    MomentOverflow(String),

    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("extinction: {0}")]
    Extinction(String),

    /// No replica stayed in the corridor; `upper` is a 95% upper confidence
    /// bound on the probability.
    #[error("no surviving path in {reps} replicas (95% upper bound {upper})")]
    ZeroHits { reps: usize, upper: f64 },

    #[error("grid refinement did not converge: {0}")]
    NonConvergence(String),

    #[error("populations are not ordered for the coupling")]
    PreconditionOrder,

    #[error("increment {increment} at index {index} exceeds step bound {bound}")]
    StepBoundViolated { index: usize, increment: f64, bound: f64 },

    #[error("importance weights degenerate: effective sample size {ess:.2}")]
    WeightOverflow { ess: f64 },

    #[error("tree too large: expected {expected:.0} particles, budget {budget}")]
    TreeTooLarge { expected: f64, budget: usize },

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
