//! HTTP API and the embedded browser client.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use literacy_core::transparency::{rendered_notes, TransparencyTopic};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::service::{Decision, Gateway, GatewayError};

const UI_INDEX: &str = include_str!("../ui/index.html");
const UI_SCRIPT: &str = include_str!("../ui/app.js");
const UI_STYLE: &str = include_str!("../ui/style.css");

#[derive(Debug, Deserialize)]
pub struct ChatRequest {
    pub session_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionAction {
    Continue,
    Rephrase,
}

#[derive(Debug, Deserialize)]
pub struct DecisionRequest {
    pub session_id: String,
    pub pending_id: String,
    pub action: DecisionAction,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct TransparencyEntry {
    pub topic: TransparencyTopic,
    pub message: String,
}

pub struct ApiError(GatewayError);

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        Self(e)
    }
}

pub fn status_for(e: &GatewayError) -> StatusCode {
    match e {
        GatewayError::SessionBusy | GatewayError::PendingIdMismatch => StatusCode::CONFLICT,
        GatewayError::EmptyInput(_) => StatusCode::UNPROCESSABLE_ENTITY,
        GatewayError::Upstream(_) => StatusCode::BAD_GATEWAY,
        GatewayError::NoPending | GatewayError::UnknownSession => StatusCode::NOT_FOUND,
        GatewayError::ContinueForbidden => StatusCode::FORBIDDEN,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.0.code(), "message": self.0.to_string() });
        if let GatewayError::Upstream(u) = &self.0 {
            body["status"] = json!(u.status);
            body["retriable"] = json!(u.retriable);
        }
        (status_for(&self.0), Json(body)).into_response()
    }
}

fn bad_request(rejection: JsonRejection) -> Response {
    (
        StatusCode::UNPROCESSABLE_ENTITY,
        Json(json!({ "error": "invalid_request", "message": rejection.body_text() })),
    )
        .into_response()
}

async fn chat(
    State(gw): State<Arc<Gateway>>,
    body: Result<Json<ChatRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(r) => return bad_request(r),
    };
    match gw.handle_turn(&req.session_id, &req.text).await {
        Ok(outcome) => Json(outcome).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn decision(
    State(gw): State<Arc<Gateway>>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(r) => return bad_request(r),
    };
    let decision = match req.action {
        DecisionAction::Continue => Decision::Continue,
        DecisionAction::Rephrase => Decision::Rephrase(req.text.unwrap_or_default()),
    };
    match gw.resolve_pending(&req.session_id, &req.pending_id, decision).await {
        Ok(outcome) => Json(outcome).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn metrics(State(gw): State<Arc<Gateway>>, Path(session_id): Path<String>) -> Response {
    match gw.export_metrics(&session_id).await {
        Ok(report) => Json(report).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn transparency(State(gw): State<Arc<Gateway>>) -> Json<Vec<TransparencyEntry>> {
    Json(
        rendered_notes(gw.config())
            .into_iter()
            .map(|(topic, message)| TransparencyEntry { topic, message })
            .collect(),
    )
}

fn asset(content_type: &'static str, body: &'static str) -> Response {
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/v1/chat", post(chat))
        .route("/v1/decision", post(decision))
        .route("/v1/metrics/{session_id}", get(metrics))
        .route("/v1/transparency", get(transparency))
        .route("/", get(|| async { Redirect::temporary("/ui/") }))
        .route("/ui", get(|| async { Redirect::temporary("/ui/") }))
        .route("/ui/", get(|| async { asset("text/html; charset=utf-8", UI_INDEX) }))
        .route(
            "/ui/app.js",
            get(|| async { asset("text/javascript; charset=utf-8", UI_SCRIPT) }),
        )
        .route(
            "/ui/style.css",
            get(|| async { asset("text/css; charset=utf-8", UI_STYLE) }),
        )
        .with_state(gateway)
}
