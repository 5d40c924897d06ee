use thiserror::Error;

/// Errors raised by the library.
///
/// The variants mirror the failure classes the command line maps onto exit
/// codes: bad input, violated model hypotheses, and numerical failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("truncation at K={k} leaves mass deficit {deficit:e} (> 1e-9); raise truncation_K")]
    TruncationInsufficient { k: usize, deficit: f64 },

    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("a lineage exceeded the population cap of {cap} individuals")]
    CapExceeded { cap: u64 },

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
