//! Problem-details error bodies shared by every route.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use netinv_core::GraphError;
use serde_json::json;

const ERROR_BASE: &str = "https://uri.etsi.org/ngsi-ld/errors/";

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub detail: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, detail: impl Into<String>) -> Self {
        ApiError { status, kind, detail: detail.into() }
    }

    pub fn bad_request(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequestData", detail)
    }

    pub fn not_found(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "ResourceNotFound", detail)
    }

    pub fn bad_gateway(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_GATEWAY, "UpstreamFailure", detail)
    }
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        match &e {
            GraphError::Validation(_) | GraphError::Syntax { .. } => ApiError::bad_request(e.to_string()),
            GraphError::NotFound(_) => ApiError::not_found(e.to_string()),
            GraphError::AlreadyExists(_) => ApiError::new(StatusCode::CONFLICT, "AlreadyExists", e.to_string()),
            GraphError::Storage(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let title = self.status.canonical_reason().unwrap_or("error");
        let body = json!({ "type": format!("{ERROR_BASE}{}", self.kind), "title": title, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
