use thiserror::Error;

pub type Result<T> = std::result::Result<T, QhdError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QhdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value in {what} at sample {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The time stepper produced a non-finite sample.
    #[error("numerical abort at step {step} (last valid time {last_valid_time})")]
    NumericalAbort { step: usize, last_valid_time: f64 },

    #[error("negative amplitude {value} at sample {index}")]
    NegativeAmplitude { index: usize, value: f64 },

    #[error("vacuum sample {index} carries nonzero momentum amplitude {value}")]
    MomentumOnVacuum { index: usize, value: f64 },

    /// One-sided |d_x psi| limits disagree at a shared vacuum point.
    #[error(
        "|d_x psi| mismatch at vacuum point x = {location} (sample {index}): left {left}, right {right}"
    )]
    BoundaryMismatch {
        index: usize,
        location: f64,
        left: f64,
        right: f64,
    },

    #[error("decay fit: {0}")]
    Fit(String),
}

pub(crate) fn check_finite_real(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(QhdError::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn check_finite_complex(values: &[num_complex::Complex64], what: &'static str) -> Result<()> {
    match values
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        Some(index) => Err(QhdError::NonFinite { what, index }),
        None => Ok(()),
    }
}
