use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Arguments violate a documented precondition.
    InvalidInput(String),
    /// Model parameters produce a non-positive Ogden coefficient or an odd order.
    InvalidParameters(String),
    /// A deformation has non-positive Jacobian determinant somewhere.
    Inadmissible(String),
    /// An iterative linear solve hit its iteration cap.
    NoConvergence { iterations: usize, residual: f64 },
    /// The transport map of a time segment cannot be inverted by fixed-point iteration.
    NonContractive { segment: usize, lipschitz: f64 },
    /// Failure inside an alternation sweep of the geodesic solver.
    Sweep { sweep: usize, source: alloc::boxed::Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidParameters(msg) => write!(f, "invalid parameters: {msg}"),
            Error::Inadmissible(msg) => write!(f, "inadmissible deformation: {msg}"),
            Error::NoConvergence { iterations, residual } => write!(
                f,
                "linear solver did not converge after {iterations} iterations (relative residual {residual:e})"
            ),
            Error::NonContractive { segment, lipschitz } => write!(
                f,
                "time segment {segment} is not invertible by fixed-point iteration (|DΦ - 1| = {lipschitz})"
            ),
            Error::Sweep { sweep, source } => write!(f, "sweep {sweep}: {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::Sweep { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
