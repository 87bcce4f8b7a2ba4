use thiserror::Error;

/// Errors raised by model construction, estimation and tuning.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid model order: n_g must be at least 1")]
    InvalidOrder,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("regressor is rank deficient (reciprocal condition {rcond:.3e})")]
    SingularRegressor { rcond: f64 },

    #[error("unstable pole: |w| = {0} is not inside the unit disc")]
    UnstablePole(f64),

    #[error("invalid pole grid: {0}")]
    Grid(String),

    #[error("conjugate closure violated: imaginary residue {0:.3e}")]
    ConjugateClosure(f64),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("kernel matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("singular factor: {0}")]
    SingularFactor(String),

    #[error("sample is not in the span of the active atoms (relative residual {0:.3e})")]
    NotInSpan(f64),

    #[error("zero residual: rho is unbounded")]
    InfiniteRho,

    #[error("eigen-decomposition failed")]
    EigenFailure,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("constant reference signal: metric is undefined")]
    ConstantReference,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
