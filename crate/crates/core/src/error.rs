use std::fmt;

/// Errors raised by the numerical routines of the lab.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A standing assumption (ellipticity, non-negativity, ...) failed on concrete data.
    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("eigensolver did not converge for eigenvalue {index} after {iterations} sweeps (off-diagonal residual {residual:e})")]
    EigenNoConvergence {
        index: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("power iteration did not converge in {iterations} steps (last relative change {change:e})")]
    PowerIteration { iterations: usize, change: f64 },

    #[error("singular shifted system at lambda = {0:e}")]
    SingularSolve(f64),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("Picard iteration outside contraction regime (distances {distances:?})")]
    NoContraction { distances: Vec<f64> },

    #[error("t = {t} is past the blow-up bound {bound}")]
    PastBlowup { t: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;

/// Coarse classification used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
}

impl LabError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            LabError::GridMismatch(_) | LabError::InvalidInput(_) => ErrorKind::Input,
            _ => ErrorKind::Numerical,
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorKind::Input => write!(f, "input"),
            ErrorKind::Numerical => write!(f, "numerical"),
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::InvalidInput(msg.into()))
}
