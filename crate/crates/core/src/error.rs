//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// A parameter or input failed validation.
    InvalidParameter(String),
    /// The state or its derivative became non-finite during integration.
    NonFiniteState { t: f64 },
    /// The adaptive step size shrank below the smallest representable
    /// increment of the current time; carries the last accepted state.
    StepSizeUnderflow { t: f64, last_state: Vec<f64> },
    /// Integration exceeded its step budget.
    MaxStepsExceeded { t: f64 },
    /// A trajectory or series does not cover a required time window.
    InsufficientCoverage {
        needed: (f64, f64),
        available: (f64, f64),
    },
    /// A closed-form inversion hit a vanishing denominator.
    SingularInversion(String),
    /// A computed quantity fell outside its admissible range.
    OutOfRange(String),
    /// A signal is too short for the requested operation.
    SignalTooShort { len: usize, needed: usize },
    /// Not enough peak intervals survived filtering.
    TooFewIntervals { found: usize },
    /// Not enough peaks for the requested estimate.
    TooFewPeaks { found: usize, needed: usize },
    /// A signal has no usable extremum (e.g. it is constant).
    FlatSignal,
    /// A model evaluated to a non-finite value where finite output is required.
    NonFiniteModel(String),
    /// A least-squares design matrix is rank deficient.
    RankDeficient,
    /// A loosening-rate sample was non-positive where positivity is required.
    NonPositiveGamma { index: usize, value: f64 },
    /// A derivative-free search could not make progress.
    SearchFailed(String),
    /// Configuration or CLI input failed validation before any compute.
    Validation(String),
    Io(std::io::Error),
    Csv(csv::Error),
    Toml(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NonFiniteState { t } => {
                write!(f, "non-finite state encountered at t = {t} s")
            }
            Error::StepSizeUnderflow { t, .. } => {
                write!(f, "step size underflow at t = {t} s")
            }
            Error::MaxStepsExceeded { t } => {
                write!(f, "integration step budget exceeded at t = {t} s")
            }
            Error::InsufficientCoverage { needed, available } => write!(
                f,
                "window [{}, {}] s not covered by data spanning [{}, {}] s",
                needed.0, needed.1, available.0, available.1
            ),
            Error::SingularInversion(msg) => write!(f, "singular inversion: {msg}"),
            Error::OutOfRange(msg) => write!(f, "result out of range: {msg}"),
            Error::SignalTooShort { len, needed } => {
                write!(f, "signal too short: {len} samples, need more than {needed}")
            }
            Error::TooFewIntervals { found } => {
                write!(f, "too few peak intervals: found {found}, need at least 2")
            }
            Error::TooFewPeaks { found, needed } => {
                write!(f, "too few peaks: found {found}, need at least {needed}")
            }
            Error::FlatSignal => write!(f, "flat signal: no usable extremum"),
            Error::NonFiniteModel(msg) => write!(f, "non-finite model output: {msg}"),
            Error::RankDeficient => write!(f, "rank-deficient least-squares system"),
            Error::NonPositiveGamma { index, value } => write!(
                f,
                "non-positive loosening rate {value} at row {index}; only net-loosening \
                 cases can be fitted"
            ),
            Error::SearchFailed(msg) => write!(f, "search failed: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Csv(e) => write!(f, "csv error: {e}"),
            Error::Toml(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Csv(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}
