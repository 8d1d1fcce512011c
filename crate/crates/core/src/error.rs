use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("permittivity at cell {cell} is {value}; must be finite and >= 1")]
    InvalidPermittivity { cell: usize, value: f64 },

    #[error("expected a {expected}D permittivity map, got {found}D")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("stiffness operator is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("wavepacket projection onto retained modes is empty")]
    EmptyProjection,

    #[error("retained modes capture only {0:.4} of the packet norm (need >= 0.90)")]
    LowCapture(f64),

    #[error("photon number {0} must be even and positive")]
    OddPhotonNumber(u32),

    #[error("detector folds ({alpha}, {beta}) must both equal N/2 = {expected}")]
    FoldMismatch { alpha: u32, beta: u32, expected: u32 },

    #[error("indeterminate correlation: numerator {numerator:e} with vanishing denominators ({denom_alpha:e}, {denom_beta:e})")]
    IndeterminateCorrelation {
        numerator: f64,
        denom_alpha: f64,
        denom_beta: f64,
    },

    #[error("{quantity} has imaginary residue {imag:e} (real part {real:e})")]
    ImaginaryResidue {
        quantity: &'static str,
        real: f64,
        imag: f64,
    },

    #[error("ladder sequence of length {0} exceeds the oracle limit")]
    OracleSize(usize),

    #[error("beamsplitter calibration: {0}")]
    Calibration(String),

    #[error("series has no fringe (flat within tolerance)")]
    NoFringe,

    #[error("no monotone transition found: {0}")]
    NoTransition(String),

    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. }
            | Error::Parse(_)
            | Error::InvalidGrid(_)
            | Error::Geometry(_)
            | Error::Calibration(_) => ErrorClass::Config,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Numerical,
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
