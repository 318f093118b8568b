//! `POST /classify` and `GET /health` over one shared model.

use std::net::SocketAddr;
use std::sync::Arc;

use alfa_core::classifier::{ForestModel, MODEL_SCHEMA};
use alfa_core::pipeline::PipelineOptions;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use base64::Engine;
use serde::Deserialize;

use crate::classify_bytes;

#[derive(Clone)]
struct AppState {
    model: Arc<ForestModel>,
    opts: PipelineOptions,
    threshold: Option<f64>,
}

#[derive(Deserialize)]
struct ClassifyRequest {
    image_b64: String,
}

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn bad_request(msg: impl std::fmt::Display) -> Response {
    json(
        StatusCode::BAD_REQUEST,
        format!("{}\n", serde_json::json!({ "error": msg.to_string() })),
    )
}

async fn health() -> Response {
    json(
        StatusCode::OK,
        format!("{}\n", serde_json::json!({ "status": "ok", "model_schema": MODEL_SCHEMA })),
    )
}

async fn classify_handler(State(state): State<AppState>, body: Bytes) -> Response {
    let req: ClassifyRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("malformed request body: {e}")),
    };
    let bytes = match base64::engine::general_purpose::STANDARD.decode(req.image_b64.trim()) {
        Ok(b) => b,
        Err(e) => return bad_request(format!("invalid base64: {e}")),
    };
    let result = tokio::task::spawn_blocking(move || {
        classify_bytes(&bytes, &state.model, &state.opts, state.threshold)
    })
    .await;
    match result {
        Ok(Ok(resp)) if resp.is_error() => json(StatusCode::UNPROCESSABLE_ENTITY, resp.to_json()),
        Ok(Ok(resp)) => json(StatusCode::OK, resp.to_json()),
        Ok(Err(e)) => bad_request(format!("undecodable image: {e}")),
        Err(e) => json(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("{}\n", serde_json::json!({ "error": e.to_string() })),
        ),
    }
}

pub fn router(model: Arc<ForestModel>, opts: PipelineOptions, threshold: Option<f64>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/classify", post(classify_handler))
        .with_state(AppState { model, opts, threshold })
}

pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}
