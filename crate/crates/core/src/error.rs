use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid bit string: {0}")]
    InvalidBits(String),

    #[error("guard exceeded: {what} is {actual}, limit {limit}")]
    GuardExceeded {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel kind or dimension mismatch: {0}")]
    KindMismatch(String),

    #[error("hard set generation failed after {attempts} attempts ({accepted} of {wanted} vectors accepted)")]
    GenerationFailed {
        attempts: usize,
        accepted: usize,
        wanted: usize,
    },

    #[error("parameter violation: {0}")]
    ParameterViolation(String),

    #[error("sequence is not monotone consistent: examples {0} and {1}")]
    NotMonotoneConsistent(usize, usize),

    #[error("assertion failed at step {step}: {claim}")]
    AssertionFailure { step: usize, claim: String },
}

impl Error {
    pub(crate) fn check_len(left: usize, right: usize) -> Result<()> {
        if left == right {
            Ok(())
        } else {
            Err(Error::LengthMismatch { left, right })
        }
    }
}
