use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed address: {0}")]
    MalformedAddress(String),
    #[error("malformed region: {0}")]
    MalformedRegion(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("store corrupt: {0}")]
    StoreCorrupt(String),
    #[error("writer lock for workbook {0} unavailable")]
    ConcurrentWriter(String),
    #[error("invalid rule: {0}")]
    RuleInvalid(String),
    #[error("duplicate rule id: {0}")]
    DuplicateRuleId(String),
    #[error("pattern window needs at least 2 values, got {0}")]
    WindowTooShort(usize),
    #[error("series needs at least 2 values, got {0}")]
    SeriesTooShort(usize),
    #[error("series contains non-numeric values")]
    NonNumericSeries,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable code, shared by the CLI and the HTTP API.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedAddress(_) => "MALFORMED_ADDRESS",
            Error::MalformedRegion(_) => "MALFORMED_REGION",
            Error::Format(_) => "FORMAT_ERROR",
            Error::Constraint(_) => "CONSTRAINT_ERROR",
            Error::UnsupportedFeature(_) => "UNSUPPORTED_FEATURE",
            Error::NotFound(_) => "NOT_FOUND",
            Error::StoreCorrupt(_) => "STORE_CORRUPT",
            Error::ConcurrentWriter(_) => "CONFLICT",
            Error::RuleInvalid(_) => "RULE_INVALID",
            Error::DuplicateRuleId(_) => "DUPLICATE_RULE_ID",
            Error::WindowTooShort(_) => "WINDOW_TOO_SHORT",
            Error::SeriesTooShort(_) => "SERIES_TOO_SHORT",
            Error::NonNumericSeries => "NON_NUMERIC_SERIES",
            Error::LengthMismatch(..) => "LENGTH_MISMATCH",
            Error::ManifestInvalid(_) => "MANIFEST_INVALID",
            Error::InvalidArgument(_) => "BAD_REQUEST",
            Error::Io(_) => "IO_ERROR",
        }
    }
}
