use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("session already holds pair {0}; vote or skip first")]
    Outstanding(String),

    #[error("unknown or spent token")]
    UnknownToken,

    #[error("token expired")]
    Expired,

    #[error("token was issued to another session")]
    WrongSession,

    #[error("{0}")]
    BadRequest(String),

    #[error("catalog needs at least 2 items")]
    CatalogTooSmall,

    #[error("no comparisons recorded yet")]
    EmptyLog,

    #[error("{0}")]
    Config(String),

    #[error("{path} line {line}: {message}")]
    CorruptLog { path: PathBuf, line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] pairrank_core::Error),

    #[error("background task failed: {0}")]
    Task(String),
}

impl ServiceError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ServiceError::Io { path: path.into(), source }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownToken => StatusCode::NOT_FOUND,
            ServiceError::Outstanding(_)
            | ServiceError::WrongSession
            | ServiceError::CatalogTooSmall
            | ServiceError::EmptyLog => StatusCode::CONFLICT,
            ServiceError::Expired => StatusCode::GONE,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Core(pairrank_core::Error::InvalidInput(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
