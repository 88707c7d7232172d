use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{sites} sites exceeds the dense-matrix cap of {cap}")]
    Capacity { sites: usize, cap: usize },
    #[error("norm drifted by {drift:.3e} during evolution; retry with dt <= {suggested_dt:.3e}")]
    NumericalInstability { drift: f64, suggested_dt: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("incomplete calibration: {0}")]
    IncompleteCalibration(String),
    #[error("singular calibration on qubit {qubit}: survival probability equals 2")]
    SingularCalibration { qubit: usize },
    #[error("undefined normalization: {0}")]
    UndefinedNormalization(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalInstability { .. } | Error::Linalg(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
