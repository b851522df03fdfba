use thiserror::Error;

/// Failure taxonomy shared by every module. The CLI maps each variant onto a
/// distinct exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the mathematical domain (nonpositive length, zero mode, t <= 0 ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested analytic continuation is not available or did not converge.
    #[error("continuation error: {0}")]
    Continuation(String),
    /// Evaluation point outside the region where the requested method is valid.
    #[error("range error: {0}")]
    Range(String),
    /// A spectral value sits in the excluded sector around the negative real axis.
    #[error("branch error: {0}")]
    Branch(String),
    /// Least-squares or asymptotic fit failed (ill-conditioned, too few samples, ...).
    #[error("fit error: {0}")]
    Fit(String),
    /// Requested feature lies outside what the engine supports.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps the message with a provenance prefix, keeping the variant.
    pub fn context(self, what: &str) -> Self {
        match self {
            Error::Domain(m) => Error::Domain(format!("{what}: {m}")),
            Error::Continuation(m) => Error::Continuation(format!("{what}: {m}")),
            Error::Range(m) => Error::Range(format!("{what}: {m}")),
            Error::Branch(m) => Error::Branch(format!("{what}: {m}")),
            Error::Fit(m) => Error::Fit(format!("{what}: {m}")),
            Error::Unsupported(m) => Error::Unsupported(format!("{what}: {m}")),
        }
    }
}
