use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: spin systems need N >= 2")]
    InvalidDimension(usize),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    TraceNotOne(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("Bloch vector has norm {0} > 1")]
    OutsideBall(f64),

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration diverged at step {step} (t = {t}): eigenvalue {min_eigenvalue:e} before clipping, u = {control}, purity deficit = {purity}")]
    Diverged {
        step: usize,
        t: f64,
        min_eigenvalue: f64,
        control: f64,
        purity: f64,
    },

    #[error("{diverged} of {total} trajectories diverged (more than 10%)")]
    EnsembleDiverged { diverged: usize, total: usize },

    #[error("insufficient data: {usable} usable points, need at least {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
}

impl Error {
    /// Step-local divergence detected before the caller knows where it happened.
    pub(crate) fn projection_failure(min_eigenvalue: f64) -> Self {
        Error::Diverged {
            step: 0,
            t: 0.0,
            min_eigenvalue,
            control: f64::NAN,
            purity: f64::NAN,
        }
    }
}
