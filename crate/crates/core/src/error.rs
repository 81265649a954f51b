use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (symmetric part {asymmetry:e})")]
    NotSkew { asymmetry: f64 },

    #[error("matrix is not a rotation (orthonormality error {orthonormality_error:e}, det {det})")]
    NotARotation { orthonormality_error: f64, det: f64 },

    #[error("cannot project onto SO(3): determinant {det} is not positive")]
    NonPositiveDeterminant { det: f64 },

    #[error("invalid inertia parameters: {0}")]
    InvalidParams(String),

    #[error("{0} not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("shape path is not uniformly sampled: {0}")]
    NonUniformSampling(String),

    #[error("shape path is not closed (endpoint gap {gap:e})")]
    OpenLoop { gap: f64 },

    #[error("schedule does not cover [{start}, {end}]")]
    ScheduleRange { start: f64, end: f64 },

    #[error("numerical abort at step {step}: orthonormality error {orthonormality_error:e}")]
    NumericalAbort { step: usize, orthonormality_error: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
