use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid device: {reason} (residual {residual:.3e})")]
    InvalidDevice { reason: String, residual: f64 },

    #[error("degenerate device: {0}")]
    DegenerateDevice(String),

    #[error(
        "truncation error: {detail}; leakage {leakage:.3e} exceeds tolerance {tolerance:.1e}, increase the cutoff"
    )]
    Truncation { detail: String, leakage: f64, tolerance: f64 },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("singular threshold: {0}")]
    SingularThreshold(String),

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("monotonicity violated: E_in = {e_in:.12}, E_out = {e_out:.12}")]
    MonotonicityViolation { e_in: f64, e_out: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("optimizer did not converge: {0}")]
    Convergence(String),

    #[error("row {row} ({parameter} = {value}): {source}")]
    Row { row: usize, parameter: &'static str, value: f64, source: Box<Error> },
}

impl Error {
    /// The underlying error with any row context removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Row { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
