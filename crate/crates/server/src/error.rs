use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use prefgait::gait::GaitError;
use prefgait::query::QueryError;
use prefgait::session::SessionError;
use serde_json::json;

/// Error body: `{"error": kind, "message": text, ...details}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
    pub details: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            details: json!({}),
        }
    }

    fn with(mut self, details: serde_json::Value) -> Self {
        self.details = details;
        self
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn conflict(message: impl Into<String>, state: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message).with(json!({ "state": state.to_string() }))
    }

    pub fn unprocessable(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, kind, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn json(err: serde_json::Error) -> Self {
        Self::bad_request(format!("malformed JSON: {err}")).with(json!({
            "line": err.line(),
            "column": err.column(),
        }))
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::InvalidConfig(fields) => {
                ApiError::bad_request("invalid session config").with(json!({ "fields": fields }))
            }
            QueryError::InvalidState { state, .. } => ApiError::conflict(e.to_string(), state),
            QueryError::ValidationComplete => ApiError::conflict(e.to_string(), "validating"),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Query(q) => q.into(),
            SessionError::NoPendingQuery(phase) => ApiError::conflict(e.to_string(), phase),
            SessionError::TooEarly { elapsed_s, required_s } => {
                ApiError::new(StatusCode::TOO_EARLY, "too_early", e.to_string()).with(json!({
                    "elapsed_s": elapsed_s,
                    "required_s": required_s,
                    "retry_after_s": required_s - elapsed_s,
                }))
            }
            SessionError::Io(_) => ApiError::internal(e.to_string()),
            SessionError::Oracle(_) | SessionError::MissingOracle | SessionError::UnexpectedOracle => {
                ApiError::bad_request(e.to_string())
            }
        }
    }
}

impl From<GaitError> for ApiError {
    fn from(e: GaitError) -> Self {
        match &e {
            GaitError::Parse { row, column, message } => {
                let details = json!({ "row": row, "column": column, "reason": message });
                ApiError::unprocessable("trace_parse", e.to_string()).with(details)
            }
            GaitError::UnsupportedInput(_) => ApiError::unprocessable("unsupported_input", e.to_string()),
            _ => ApiError::unprocessable("invalid_trace", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let (Some(map), serde_json::Value::Object(extra)) = (body.as_object_mut(), self.details) {
            map.extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}
