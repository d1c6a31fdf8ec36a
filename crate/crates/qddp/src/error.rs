use core::fmt;

/// Error type shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    Domain(&'static str),
    /// `q`-exponential evaluated at or beyond its `q > 1` pole.
    QExpPole { q: f64, x: f64 },
    /// Entropic index outside the admissible range for the operation.
    EntropicIndexRange { q: f64, lo: f64, hi: f64 },
    /// Vector or matrix dimensions do not match.
    DimensionMismatch { expected: usize, got: usize },
    /// A matrix required to be symmetric positive-definite failed to factor.
    NotPositiveDefinite,
    /// `Q_uu` stayed indefinite after regularization; carries the smallest
    /// eigenvalue observed.
    RegularizationNeeded { min_eigenvalue: f64 },
    /// Rollout produced a non-finite state at the given timestep.
    RolloutDiverged { timestep: usize },
    /// Bracket expansion for the bisection solver failed to enclose a root.
    BracketFailure,
    /// A nominal value estimate was negative where nonnegativity is required.
    NegativeValueEstimate { timestep: usize, value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::QExpPole { q, x } => {
                write!(f, "q-exponential pole: q = {q}, x = {x}")
            }
            Error::EntropicIndexRange { q, lo, hi } => {
                write!(f, "entropic index q = {q} outside ({lo}, {hi})")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NotPositiveDefinite => write!(f, "matrix is not positive-definite"),
            Error::RegularizationNeeded { min_eigenvalue } => {
                write!(f, "Q_uu indefinite (min eigenvalue {min_eigenvalue})")
            }
            Error::RolloutDiverged { timestep } => {
                write!(f, "rollout diverged at timestep {timestep}")
            }
            Error::BracketFailure => write!(f, "bisection bracket expansion failed"),
            Error::NegativeValueEstimate { timestep, value } => {
                write!(f, "negative value estimate {value} at timestep {timestep}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
