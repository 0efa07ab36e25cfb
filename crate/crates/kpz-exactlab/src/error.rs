//! Error type shared across the crate.

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Quadrature node doubling hit its cap before the error estimate
    /// dropped below tolerance.
    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),
    /// A pole of the integrand lies on (or numerically on) the contour.
    #[error("pole on contour: {0}")]
    PoleOnContour(String),
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    DomainError(String),
    /// No admissible contour radii exist for the requested parameters.
    #[error("contour conflict: {0}")]
    ContourConflict(String),
    /// A quantity that must be real (or two redundant evaluations) failed
    /// an internal consistency check.
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    /// A simulation window is too small for the requested observation.
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    /// Problem size exceeds what an enumeration oracle will attempt.
    #[error("too large: {0}")]
    TooLarge(String),
    /// Scaled observation point falls outside the valid range.
    #[error("out of range: {0}")]
    OutOfRange(String),
    /// Inputs that must agree (lengths, orderings, parities) do not.
    #[error("incompatible inputs: {0}")]
    IncompatibleInputs(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
