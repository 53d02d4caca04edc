use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter `{name}` = {value} is out of range ({range})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("invalid factor permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("partial trace needs at least one kept factor")]
    EmptyKeep,
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("test operator eigenvalues outside [0, 1]: [{0:e}, {1:e}]")]
    NotATest(f64, f64),
    #[error("POVM elements do not sum to identity (max deviation {0:e})")]
    NotAPovm(f64),
    #[error("negative outcome probability {0:e}")]
    NegativeProbability(f64),
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64, range: &'static str) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}

/// A value together with whether its validity condition held.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Flagged {
    pub value: f64,
    pub condition: bool,
}

impl Flagged {
    pub fn new(value: f64, condition: bool) -> Self {
        Flagged { value, condition }
    }
}
