use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use quillmate_core::gateway::TemplateError;
use quillmate_core::Error;

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn bad_request(kind: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, message)
    }

    pub fn not_found(kind: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, kind, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

/// HTTP status for an engine error. Unknown resources are 404, caller
/// mistakes 400, state conflicts 409, provider failures 502 and storage or
/// template configuration faults 500.
pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::UnknownDocument(_)
        | Error::UnknownHistoryEntry(_)
        | Error::UnknownHighlight(_)
        | Error::UnknownGeneration(_)
        | Error::UnknownSession(_) => StatusCode::NOT_FOUND,
        Error::UnknownEventType(_)
        | Error::StyleDescription(_)
        | Error::RichText(_)
        | Error::EmptyRange
        | Error::OutOfBounds { .. }
        | Error::EmptyExcerpt
        | Error::EmptyInstruction
        | Error::InvalidSettings(_)
        | Error::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        // a caller-supplied binding set for self-evaluation can be wrong
        Error::Template(TemplateError::MissingBinding(_) | TemplateError::UnusedBinding(_)) => {
            StatusCode::BAD_REQUEST
        }
        Error::AlreadyResolved(_) | Error::GenerationConflict(..) | Error::StaleCandidate { .. } => {
            StatusCode::CONFLICT
        }
        Error::ProviderFailure { .. } | Error::Timeout { .. } | Error::MalformedProviderOutput(_) => {
            StatusCode::BAD_GATEWAY
        }
        Error::Template(_) | Error::Io(_) | Error::Corrupt(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::new(status_for(&e), e.kind(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request("MalformedRequest", r.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(r: PathRejection) -> Self {
        ApiError::bad_request("MalformedRequest", r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request("MalformedRequest", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            kind: self.kind,
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
