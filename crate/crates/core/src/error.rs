use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not defined for the given input (e.g. enumerating a
    /// continuous distribution).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// An internal cross-check between two independent computations failed.
    #[error("numerical consistency check failed: {0}")]
    Numerical(String),

    /// An exhaustive enumeration (or the dimension cap feeding it) would
    /// exceed the configured limit.
    #[error("enumeration guard exceeded: {0}")]
    Guard(String),

    /// The 2x2 covariance of (T1, T2) is not positive definite, so the
    /// whitened statistic is undefined.
    #[error(
        "degenerate covariance: psi11={psi11}, psi12={psi12}, psi22={psi22}, det={det}{}",
        context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default()
    )]
    DegenerateCovariance {
        psi11: f64,
        psi12: f64,
        psi22: f64,
        det: f64,
        context: Option<String>,
    },

    /// Invalid experiment configuration.
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
