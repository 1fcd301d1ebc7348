//! JSON-over-HTTP routes under `/api/v1`.
//!
//! Handlers are thin: they parse the request, take the engine lock and map
//! engine errors onto status codes. Mutations hold the write lock for the
//! whole append-then-apply step.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use sentinel_core::{Decision, PrivacyHeuristic, UserId};
use serde::Deserialize;
use serde_json::json;

use crate::engine::{
    DecisionOutcome, DeleteOutcome, Engine, EngineError, NewPost, PostCreated, ReportOutcome,
    ReportRequest, RiskIndex, TableView, UserThreshold,
};

pub type SharedEngine = Arc<RwLock<Engine>>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(err: EngineError) -> Self {
        use sentinel_core::Error as E;
        let status = match &err {
            EngineError::Core(E::Validation(_) | E::Parse { .. } | E::NotRegretted) => {
                StatusCode::BAD_REQUEST
            }
            EngineError::Core(E::NotFound(_)) => StatusCode::NOT_FOUND,
            EngineError::Core(E::Conflict(_) | E::State(_)) => StatusCode::CONFLICT,
            EngineError::Core(E::InsufficientEvidence { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            EngineError::Core(E::Integrity(_))
            | EngineError::Journal(_)
            | EngineError::Replay(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!("{err}");
        }
        Self {
            status,
            message: err.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        Self::bad_request(rejection.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(rejection: QueryRejection) -> Self {
        Self::bad_request(rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(engine: Engine) -> Router {
    router_with(Arc::new(RwLock::new(engine)))
}

pub fn router_with(engine: SharedEngine) -> Router {
    Router::new()
        .route("/api/v1/posts", post(create_post))
        .route("/api/v1/posts/{id}", axum::routing::delete(delete_post))
        .route("/api/v1/posts/{id}/decision", post(decide))
        .route("/api/v1/incident-reports", post(report_incident))
        .route("/api/v1/heuristics", get(heuristics))
        .route("/api/v1/contingency-table", get(table))
        .route("/api/v1/risk-index", get(risk_index))
        .route("/api/v1/users/{id}/threshold", get(threshold))
        .with_state(engine)
}

fn write(engine: &SharedEngine) -> std::sync::RwLockWriteGuard<'_, Engine> {
    engine
        .write()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn read(engine: &SharedEngine) -> std::sync::RwLockReadGuard<'_, Engine> {
    engine
        .read()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn create_post(
    State(engine): State<SharedEngine>,
    body: Result<Json<NewPost>, JsonRejection>,
) -> ApiResult<PostCreated> {
    let Json(req) = body?;
    Ok(Json(write(&engine).create_post(req, Utc::now())?))
}

#[derive(Deserialize)]
struct DecisionBody {
    action: Decision,
}

async fn decide(
    State(engine): State<SharedEngine>,
    Path(id): Path<String>,
    body: Result<Json<DecisionBody>, JsonRejection>,
) -> ApiResult<DecisionOutcome> {
    let Json(body) = body?;
    Ok(Json(write(&engine).decide(&id, body.action, Utc::now())?))
}

async fn delete_post(
    State(engine): State<SharedEngine>,
    Path(id): Path<String>,
) -> ApiResult<DeleteOutcome> {
    Ok(Json(write(&engine).delete_post(&id, Utc::now())?))
}

async fn report_incident(
    State(engine): State<SharedEngine>,
    body: Result<Json<ReportRequest>, JsonRejection>,
) -> ApiResult<ReportOutcome> {
    let Json(req) = body?;
    Ok(Json(write(&engine).report_incident(req, Utc::now())?))
}

async fn heuristics(State(engine): State<SharedEngine>) -> ApiResult<Vec<PrivacyHeuristic>> {
    Ok(Json(read(&engine).heuristics()))
}

async fn table(State(engine): State<SharedEngine>) -> ApiResult<TableView> {
    Ok(Json(read(&engine).table()))
}

async fn risk_index(
    State(engine): State<SharedEngine>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<RiskIndex> {
    let Query(q) = query?;
    let param = |name: &str| {
        q.get(name)
            .filter(|v| !v.trim().is_empty())
            .ok_or_else(|| ApiError::bad_request(format!("missing query parameter `{name}`")))
    };
    let (ph, uin) = (param("ph")?, param("uin")?);
    let alpha = q
        .get("alpha")
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|e| ApiError::bad_request(format!("alpha: {e}")))
        })
        .transpose()?;
    Ok(Json(read(&engine).risk_index(ph, uin, alpha)?))
}

async fn threshold(
    State(engine): State<SharedEngine>,
    Path(id): Path<String>,
) -> ApiResult<UserThreshold> {
    let user_id = UserId::new(id);
    let threshold = read(&engine).threshold(&user_id)?;
    Ok(Json(UserThreshold { user_id, threshold }))
}
