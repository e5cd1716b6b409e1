use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular homography (|det| = {det:e})")]
    Singular { det: f64 },
    #[error("point mapped to the plane at infinity (|w| = {w:e})")]
    AtInfinity { w: f64 },
    #[error("homography not representable on the canonical branch: {0}")]
    NotRepresentable(&'static str),
    #[error("degenerate quadrilateral: {0}")]
    DegenerateQuad(&'static str),
    #[error("displacement too small for a condition number (|dp| = {0:e})")]
    RejectedSample(f64),
    #[error("zero-variance input: {0}")]
    ZeroVariance(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Singular { .. } => "singular",
            Error::AtInfinity { .. } => "at_infinity",
            Error::NotRepresentable(_) => "not_representable",
            Error::DegenerateQuad(_) => "degenerate_quad",
            Error::RejectedSample(_) => "rejected_sample",
            Error::ZeroVariance(_) => "zero_variance",
            Error::Shape(_) => "shape",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
