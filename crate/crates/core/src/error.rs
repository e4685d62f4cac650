use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Paired tensor extents disagree, or a permutation/reshape does not fit
    /// the tensor's shape.
    #[error("contract-shape error: {0}")]
    ContractShape(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical self-check failed (e.g. a nonvanishing imaginary residue
    /// in a quantity that must be real).
    #[error("internal-consistency error: {0}")]
    InternalConsistency(String),

    /// A normalized expectation was requested while the trace is numerically
    /// zero.
    #[error("divergence: trace {trace:e} is below the normalization threshold")]
    Divergence { trace: f64 },

    /// The requested problem does not fit the resource limits of the
    /// operation (e.g. a dense oracle at too large a system size).
    #[error("resource error: {0}")]
    Resource(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
