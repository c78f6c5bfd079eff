use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("curve is not a Jordan curve around the origin: {0}")]
    NotJordan(String),
    #[error("iteration did not converge after {iterations} steps (last residual {last:e})")]
    NonConvergence { iterations: usize, last: f64, history: Vec<f64> },
    #[error("Newton iteration diverged; last iterate {re:e}{im:+e}i")]
    NewtonDivergence { re: f64, im: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("regions too close: measured separation {measured:e}, required {required:e}")]
    Separation { measured: f64, required: f64 },
    #[error("regions overlap: {0}")]
    Overlap(String),
    #[error("interface inequality fails at {re:e}{im:+e}i by {excess:e}")]
    Interface { re: f64, im: f64, excess: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("ill-conditioned least-squares system (estimated condition {0:e}); use an orthogonalized basis")]
    IllConditioned(f64),
    #[error("point outside stage coverage: {0}")]
    OutsideCoverage(String),
    #[error("log-domain tier overflow: {0}")]
    TierOverflow(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
