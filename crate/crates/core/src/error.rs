use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid-range: lower bound {lo} exceeds upper bound {hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid-config: {0}")]
    InvalidConfig(String),

    #[error("invalid-label: {0}")]
    InvalidLabel(String),

    #[error("insufficient-data: {0}")]
    InsufficientData(String),

    #[error("parse-error: row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema-error: {0}")]
    Schema(String),

    #[error("shape-error: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("type-error: {0}")]
    TypeMismatch(String),

    #[error("undefined-correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("divergence: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("sampler-exhausted: no interval accepted after {0} proposals")]
    SamplerExhausted(u64),

    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json-error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv-error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn shape(expected: usize, actual: usize) -> Self {
        Error::Shape { expected, actual }
    }

    /// Stable short identifier, the prefix of the `Display` output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRange { .. } => "invalid-range",
            Error::InvalidConfig(_) => "invalid-config",
            Error::InvalidLabel(_) => "invalid-label",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Parse { .. } => "parse-error",
            Error::Schema(_) => "schema-error",
            Error::Shape { .. } => "shape-error",
            Error::TypeMismatch(_) => "type-error",
            Error::UndefinedCorrelation(_) => "undefined-correlation",
            Error::Divergence { .. } => "divergence",
            Error::SamplerExhausted(_) => "sampler-exhausted",
            Error::Io(_) => "io-error",
            Error::Json(_) => "json-error",
            Error::Csv(_) => "csv-error",
        }
    }
}
