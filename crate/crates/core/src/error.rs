use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("Hamiltonian is not self-adjoint (residual {0:.3e})")]
    NotSelfAdjoint(f64),

    #[error("W is not unitary (residual {0:.3e})")]
    NotUnitary(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step function grid does not match the discretization: {0}")]
    GridMismatch(String),

    #[error("grid is not dyadic: {0}")]
    NonDyadic(String),

    #[error("window algebra dimension {dim} exceeds cap {cap}")]
    WindowTooLarge { dim: usize, cap: usize },

    #[error("site {0} is outside the lattice window")]
    SiteOutOfWindow(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
