use axum::extract::rejection::JsonRejection;
use axum::extract::multipart::MultipartError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cbir_core::error::{Error, ErrorCode};
use serde::{Deserialize, Serialize};

/// Error body returned by every failing route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn status(&self) -> StatusCode {
        status_for(self.code)
    }
}

pub fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::NotFound => StatusCode::NOT_FOUND,
        ErrorCode::Validation | ErrorCode::Decode => StatusCode::BAD_REQUEST,
        ErrorCode::InsufficientData => StatusCode::CONFLICT,
        ErrorCode::Storage | ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let api = ApiError::new(err.code(), err.to_string());
        match &err {
            Error::NotFound { entity, id } => api.with_detail(format!("{entity}:{id}")),
            Error::CorruptStore { path, .. } | Error::StoreLocked(path) => api.with_detail(path.clone()),
            _ => api,
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError::validation("invalid JSON body").with_detail(rejection.body_text())
    }
}

impl From<MultipartError> for ApiError {
    fn from(err: MultipartError) -> Self {
        ApiError::validation("invalid multipart body").with_detail(err.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!(code = %self.code, message = %self.message, "request failed");
        }
        (self.status(), Json(self)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_errors_map_to_statuses() {
        let cases = [
            (Error::not_found("image", 3), StatusCode::NOT_FOUND),
            (Error::validation("x"), StatusCode::BAD_REQUEST),
            (Error::Decode("x".into()), StatusCode::BAD_REQUEST),
            (Error::InsufficientData("x".into()), StatusCode::CONFLICT),
            (Error::Storage("x".into()), StatusCode::INTERNAL_SERVER_ERROR),
            (Error::StoreLocked("/s".into()), StatusCode::INTERNAL_SERVER_ERROR),
        ];
        for (err, status) in cases {
            assert_eq!(ApiError::from(err).status(), status);
        }
    }

    #[test]
    fn wire_shape() {
        let json = serde_json::to_value(ApiError::from(Error::not_found("index", 7))).unwrap();
        assert_eq!(json["code"], "NOT_FOUND");
        assert_eq!(json["detail"], "index:7");
        let json = serde_json::to_value(ApiError::validation("bad")).unwrap();
        assert!(json.get("detail").is_none());
    }
}
