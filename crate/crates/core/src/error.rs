use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("record has {usable} usable rows, need at least 2")]
    EmptyRecord { usable: usize },

    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },

    #[error("grid spacing {dt} does not fit inside the record span {span}")]
    DegenerateGrid { dt: f64, span: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("window around index {center} contains only zeros")]
    DegenerateFit { center: usize },

    #[error("need at least {needed} data points, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("integration diverged at t = {t} (x = {x})")]
    Diverged { t: f64, x: f64 },

    #[error("escape at a = {a} is too rare to simulate; use the asymptotic rate")]
    RareEvent { a: f64 },

    #[error("no approach to a fold: decay-rate slope {slope:.3e} is not significantly negative (standard error {stderr:.3e})")]
    NoApproach { slope: f64, stderr: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Refusal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parameter { .. } | Error::Domain(_) => ErrorClass::Usage,
            Error::NoApproach { .. } | Error::RareEvent { .. } | Error::Diverged { .. } => {
                ErrorClass::Refusal
            }
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
