use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("path coordinate s = {s} outside road range [{lo}, {hi})")]
    OutOfRange { s: f64, lo: f64, hi: f64 },

    #[error("model domain violated: {0}")]
    Domain(String),

    #[error("invalid configuration `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("failed to parse scenario: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("failed to serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), reason: reason.into() }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Out-of-range lookups and singular dynamics both mean the model was
    /// evaluated somewhere it is not defined.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::OutOfRange { .. })
    }
}
