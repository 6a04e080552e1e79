use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Request};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use trendsketch_core::pipeline::PipelineError;
use trendsketch_core::search::SearchError;

/// Error body: `{"error": {"kind": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
pub struct ErrorDetail {
    pub kind: String,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
        }
    }

    pub fn bad_request(kind: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, kind, message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("{what} `{id}` not found"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: ErrorDetail {
                kind: self.kind.to_string(),
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        match e {
            PipelineError::InvalidRequest(_) => ApiError::bad_request("invalid_request", message),
            PipelineError::Constraint(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_constraint", message)
            }
            PipelineError::Cluster(_) => ApiError::bad_request("invalid_cluster_request", message),
            PipelineError::Search(s) => match s {
                SearchError::StaleIndex { .. } => {
                    ApiError::new(StatusCode::CONFLICT, "penalty_mismatch", message)
                }
                SearchError::DegenerateSketch(_)
                | SearchError::MissingViewport
                | SearchError::InvalidViewport(_)
                | SearchError::SketchOutOfRange(_)
                | SearchError::UnsupportedSketchDimension(_) => {
                    ApiError::bad_request("invalid_sketch", message)
                }
                SearchError::Penalty(_) => ApiError::bad_request("invalid_penalty", message),
                _ => ApiError::bad_request("search_error", message),
            },
        }
    }
}

/// JSON body extractor whose rejections use the API error shape.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    S: Send + Sync,
    T: DeserializeOwned,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(rejection) => Err(json_rejection(rejection)),
        }
    }
}

fn json_rejection(r: JsonRejection) -> ApiError {
    ApiError::bad_request("invalid_json", r.body_text())
}
