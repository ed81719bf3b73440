use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use eloran_core::coverage::CoverageError;
use eloran_core::geodata::GeodataError;
use eloran_core::jitter::JitterError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("cannot access {path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Jitter(#[from] JitterError),
    #[error(transparent)]
    Geodata(#[from] GeodataError),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn file(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        ServiceError::File {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Unprocessable(_) => "infeasible",
            ServiceError::File { .. } => "file",
            ServiceError::Coverage(e) => match e {
                CoverageError::Invalid(_)
                | CoverageError::Schema(_)
                | CoverageError::Parse(_)
                | CoverageError::Transmitter { .. } => "invalid_scenario",
                CoverageError::File { .. } => "file",
                CoverageError::Cancelled => "cancelled",
                CoverageError::Comparison(_) => "comparison",
                _ => "infeasible",
            },
            ServiceError::Jitter(e) => match e {
                JitterError::Pairing(_) | JitterError::NotAPair(_) => "pairing",
                JitterError::Log(_) => "tor_log",
                _ => "jitter",
            },
            ServiceError::Geodata(_) => "geodata",
            ServiceError::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self.kind() {
            "bad_request" | "invalid_scenario" | "tor_log" | "comparison" => StatusCode::BAD_REQUEST,
            "not_found" => StatusCode::NOT_FOUND,
            "conflict" | "cancelled" => StatusCode::CONFLICT,
            "internal" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn path(&self) -> Option<&str> {
        match self {
            ServiceError::File { path, .. } | ServiceError::Coverage(CoverageError::File { path, .. }) => Some(path),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        if let Some(p) = self.path() {
            body["path"] = json!(p);
        }
        if let ServiceError::Jitter(e) = self {
            if let Some(stage) = e.stage() {
                body["stage"] = json!(stage.to_string());
            }
        }
        json!({ "error": body })
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.to_json())).into_response()
    }
}
