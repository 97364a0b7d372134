use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
            },
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn too_large(limit: usize) -> Self {
        Self::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "image_too_large",
            format!("image exceeds the {limit}-byte limit"),
        )
    }

    pub fn undecodable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "undecodable_image", message)
    }

    /// Maps an extractor rejection, keeping its status (413 for oversized
    /// bodies, 400 otherwise).
    pub fn rejection(status: StatusCode, message: String) -> Self {
        if status == StatusCode::PAYLOAD_TOO_LARGE {
            Self::new(status, "image_too_large", message)
        } else {
            Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
        }
    }
}

impl From<piqflow_core::Error> for ApiError {
    fn from(e: piqflow_core::Error) -> Self {
        use piqflow_core::Error as E;
        let message = e.to_string();
        match e {
            E::IllegalEvent { .. } => Self::new(StatusCode::BAD_REQUEST, "illegal_event", message),
            E::Image(_) => Self::undecodable(message),
            E::Region { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "unprocessable_image", message),
            E::Tile { source, .. } => {
                let mut inner = ApiError::from(*source);
                inner.body.message = message;
                inner
            }
            E::Invalid(_) | E::InsufficientData(_) | E::UndefinedCorrelation(_) => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
            }
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}
