use thiserror::Error;

/// Errors raised by model construction, propagation and analysis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64 },

    #[error("too close to a pole of the S1 sphere (theta = {theta}) to evaluate tan(theta)")]
    PoleProximity { theta: f64 },

    #[error("control is not defined at t = {t} (table covers [{start}, {end}])")]
    ControlOutOfRange { t: f64, start: f64, end: f64 },

    #[error("{0}")]
    UnsupportedControl(&'static str),

    #[error("neither the north pole nor a fixed point was reached before t = {horizon}")]
    HorizonExpired { horizon: f64 },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable code used in error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::NotPositive { .. } => "not-positive",
            Error::StepSizeUnderflow { .. } => "step-size-underflow",
            Error::NonFinite { .. } => "non-finite",
            Error::PoleProximity { .. } => "pole-proximity",
            Error::ControlOutOfRange { .. } => "control-out-of-range",
            Error::UnsupportedControl(_) => "unsupported-control",
            Error::HorizonExpired { .. } => "horizon-expired",
            Error::Config(_) => "config",
        }
    }

    /// Name of the offending parameter, when there is one.
    pub fn parameter(&self) -> Option<&'static str> {
        match self {
            Error::InvalidParameter { name, .. } => Some(name),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
