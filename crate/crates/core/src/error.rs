use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-side precondition was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A denominator of the form `1 + (1 - q) * s` vanished.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The density handle lacks a capability the operation needs
    /// (exact sampler, known normalizer, ...).
    #[error("missing capability: {0}")]
    Capability(String),

    /// `alpha = ±1` must go through the extended KL divergence.
    #[error("alpha = {0} is a KL limit; use kl_unnormalized")]
    KlRoute(f64),

    /// The quadrature grid does not cover the support of an integrand.
    #[error("quadrature grid misses mass: estimated tail mass {tail:e} vs total {total:e}")]
    MassCapture { tail: f64, total: f64 },

    /// The density is zero where a gradient was requested.
    #[error("gradient undefined where the density vanishes")]
    ZeroDensity,

    /// A discrete transition kernel does not leave its distribution invariant.
    #[error(
        "kernel {t} does not leave the path distribution at beta_{t} invariant (max err {err:e})"
    )]
    KernelNotInvariant { t: usize, err: f64 },

    /// Too many AIS chains produced NaN increments.
    #[error("{invalid} of {total} chains invalid, exceeding the 1% budget")]
    InvalidChainBudget { invalid: usize, total: usize },

    /// Configuration file problem, with the offending field named.
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
