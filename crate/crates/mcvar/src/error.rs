//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A price is zero or negative; log returns are undefined.
    NonPositivePrice {
        class: String,
        series: String,
        date: String,
    },
    /// A series is (numerically) constant and cannot be standardized.
    ZeroVariance { class: String, series: String },
    /// A time series is shorter than an operation requires.
    SeriesTooShort { len: usize, min: usize },
    /// Too few time observations for the requested lag order.
    InsufficientObservations { t: usize, p: usize },
    /// A regression design is singular.
    SingularRegression(String),
    /// A matrix required to be positive definite is not.
    NotPositiveDefinite(String),
    /// Simulated coefficients are non-stationary.
    UnstableCoefficients { spectral_radius: f64 },
    /// An objective or iterate became non-finite (diverging step).
    NonFiniteObjective { iteration: usize },
    /// Matrix or panel dimensions do not agree.
    DimensionMismatch(String),
    /// A parameter is outside its admissible range.
    InvalidParameter(String),
    /// Class index outside `0..K`.
    ClassOutOfRange { class: usize, count: usize },
    /// Networks compared over different node sets.
    MismatchedNodes,
    /// Input panel is not standardized.
    NotStandardized { class: String, series: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonPositivePrice {
                class,
                series,
                date,
            } => {
                write!(f, "non-positive price for {class}/{series} at {date}")
            }
            Error::ZeroVariance { class, series } => {
                write!(f, "zero variance in series {class}/{series}")
            }
            Error::SeriesTooShort { len, min } => {
                write!(
                    f,
                    "series too short: {len} observations, need at least {min}"
                )
            }
            Error::InsufficientObservations { t, p } => {
                write!(f, "{t} observations cannot support lag order {p}")
            }
            Error::SingularRegression(what) => write!(f, "singular regression: {what}"),
            Error::NotPositiveDefinite(what) => write!(f, "matrix not positive definite: {what}"),
            Error::UnstableCoefficients { spectral_radius } => {
                write!(
                    f,
                    "unstable coefficients: companion spectral radius {spectral_radius}"
                )
            }
            Error::NonFiniteObjective { iteration } => {
                write!(f, "objective became non-finite at iteration {iteration}")
            }
            Error::DimensionMismatch(what) => write!(f, "dimension mismatch: {what}"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::ClassOutOfRange { class, count } => {
                write!(f, "class index {class} out of range for {count} classes")
            }
            Error::MismatchedNodes => write!(f, "networks are defined over different node sets"),
            Error::NotStandardized { class, series } => {
                write!(f, "series {class}/{series} is not standardized")
            }
        }
    }
}

impl core::error::Error for Error {}
