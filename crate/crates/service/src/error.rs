use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use cellvault_core::Error;
use serde::{Deserialize, Serialize};

/// Body of every non-2xx response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub detail: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    pub fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", detail)
    }

    pub fn not_found(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", detail)
    }
}

fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::ConcurrentWriter(_) | Error::DuplicateRuleId(_) => StatusCode::CONFLICT,
        Error::UnsupportedFeature(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        Error::StoreCorrupt(_) | Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        Error::MalformedAddress(_)
        | Error::MalformedRegion(_)
        | Error::Format(_)
        | Error::Constraint(_)
        | Error::RuleInvalid(_)
        | Error::WindowTooShort(_)
        | Error::SeriesTooShort(_)
        | Error::NonNumericSeries
        | Error::LengthMismatch(..)
        | Error::ManifestInvalid(_)
        | Error::InvalidArgument(_) => StatusCode::BAD_REQUEST,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self::new(status_for(&e), e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = serde_json::to_vec(&self).expect("error serializes");
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}
