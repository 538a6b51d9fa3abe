//! The response wrapper and the mapping from core errors to HTTP statuses.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use metrology::cfa::CfaError;
use metrology::dataset::DatasetError;
use metrology::efa::EfaError;
use metrology::reliability::ReliabilityError;
use metrology::session::SessionError;
use metrology::truescore::TrueScoreError;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Every response body. Exactly one of `result` and `error` is non-null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ApiEnvelope<T> {
    pub ok: bool,
    pub result: Option<T>,
    pub error: Option<ApiError>,
}

impl<T> ApiEnvelope<T> {
    pub fn success(result: T) -> Self {
        Self { ok: true, result: Some(result), error: None }
    }

    pub fn failure(error: ApiError) -> Self {
        Self { ok: false, result: None, error: Some(error) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ApiError {
    /// Stable machine-readable code such as `not_found` or `conflict`.
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FieldError {
    /// Dotted path into the request body, e.g. `config.thresholds.suppress`.
    pub field: String,
    pub message: String,
}

/// A failed request, rendered as an error envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub status: StatusCode,
    pub error: ApiError,
}

impl Failure {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, error: ApiError { code: code.into(), message: message.into(), fields: Vec::new() } }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} `{id}` does not exist"))
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    /// The request was well-formed JSON but a value is unacceptable.
    pub fn invalid(field: Option<&str>, message: impl Into<String>) -> Self {
        let message = message.into();
        let mut f = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", message.clone());
        if let Some(field) = field {
            f.error.fields.push(FieldError { field: field.into(), message });
        }
        f
    }

    /// The inputs were valid but the analysis could not produce a result.
    pub fn analysis(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "analysis_failed", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.status, Json(ApiEnvelope::<()>::failure(self.error))).into_response()
    }
}

/// Successful payload wrapped in an envelope.
pub struct Ok200<T>(pub T);

impl<T: Serialize> IntoResponse for Ok200<T> {
    fn into_response(self) -> Response {
        (StatusCode::OK, Json(ApiEnvelope::success(self.0))).into_response()
    }
}

pub type ApiResult<T> = Result<Ok200<T>, Failure>;

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let field = match &e {
            DatasetError::UnknownMetric(_) => Some("metrics"),
            DatasetError::InvalidBounds | DatasetError::OutOfRange { .. } => Some("reversed"),
            _ => None,
        };
        Failure::invalid(field, e.to_string())
    }
}

impl From<EfaError> for Failure {
    fn from(e: EfaError) -> Self {
        match e {
            EfaError::Dataset(d) => d.into(),
            EfaError::InvalidFactorCount { .. } => Failure::invalid(Some("k"), e.to_string()),
            EfaError::InvalidThreshold { .. } => Failure::invalid(Some("value"), e.to_string()),
            EfaError::TooFewReplications(_) => Failure::invalid(Some("reps"), e.to_string()),
            EfaError::InvalidQuantile(_) => Failure::invalid(Some("criterion"), e.to_string()),
            EfaError::MissingExpected(_)
            | EfaError::SingletonConstruct(_)
            | EfaError::TooFewConstructs(_) => Failure::invalid(Some("expected"), e.to_string()),
            EfaError::TooFewMetrics(_) | EfaError::TooFewObservations { .. } | EfaError::AlreadyRotated => {
                Failure::invalid(None, e.to_string())
            }
            EfaError::NotPositiveDefinite { .. }
            | EfaError::NonConvergence { .. }
            | EfaError::RotationFailed { .. }
            | EfaError::AdequacyFailed { .. } => Failure::analysis(e.to_string()),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Efa(inner) => inner.into(),
            SessionError::UnknownMetric(_) | SessionError::AlreadyDropped(_) => {
                Failure::invalid(Some("metric"), e.to_string())
            }
            SessionError::NothingToUndo => Failure::invalid(Some("action"), e.to_string()),
            SessionError::DigestMismatch { .. } | SessionError::UnsupportedVersion(_) => {
                Failure::invalid(Some("document"), e.to_string())
            }
        }
    }
}

impl From<CfaError> for Failure {
    fn from(e: CfaError) -> Self {
        match e {
            CfaError::Dataset(d) => d.into(),
            CfaError::EmptyStructure
            | CfaError::EmptyFactor(_)
            | CfaError::DuplicateMetric(_)
            | CfaError::DuplicateFactor(_)
            | CfaError::UnknownMetric(_) => Failure::invalid(Some("spec.structure"), e.to_string()),
            CfaError::InvalidDocument(_) => Failure::invalid(Some("model"), e.to_string()),
            CfaError::TooFewObservations { .. } | CfaError::ConstantMetric(_) => Failure::invalid(None, e.to_string()),
            CfaError::SingularCovariance | CfaError::NonConvergence { .. } => Failure::analysis(e.to_string()),
        }
    }
}

impl From<ReliabilityError> for Failure {
    fn from(e: ReliabilityError) -> Self {
        match e {
            ReliabilityError::Dataset(d) => d.into(),
            ReliabilityError::DegenerateData | ReliabilityError::ZeroTotalVariance => Failure::analysis(e.to_string()),
            _ => Failure::invalid(None, e.to_string()),
        }
    }
}

impl From<TrueScoreError> for Failure {
    fn from(e: TrueScoreError) -> Self {
        Failure::invalid(None, e.to_string())
    }
}
