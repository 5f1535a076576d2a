use thiserror::Error;

#[derive(Debug, Error)]
pub enum WarpError {
    /// Arguments that do not belong together (mismatched spaces, unknown generator, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Two distinct generators move a sampled point to the same place.
    #[error("action is not free: d(s·x, s'·x) = {distance:e} for generators {first} and {second}")]
    NotFree {
        first: String,
        second: String,
        distance: f64,
    },

    #[error("eigensolver did not converge after {iterations} iterations; best residuals {residuals:?}")]
    NonConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("unknown {kind} '{name}' (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WarpError>;
