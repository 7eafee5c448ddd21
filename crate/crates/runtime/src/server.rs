use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parley_core::Engine;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::mpsc;

use crate::wire::{StreamEvent, TurnReply, TurnRequest};

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/turn", post(turn))
        .route("/conversation/{id}/trace", get(trace))
        .route("/health", get(health))
        .with_state(AppState { engine })
}

#[derive(Debug, Default, Deserialize)]
pub struct TurnParams {
    #[serde(default)]
    pub stream: bool,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn turn(State(app): State<AppState>, Query(params): Query<TurnParams>, body: Bytes) -> Response {
    let req = match TurnRequest::parse(&body) {
        Ok(r) => r,
        Err(msg) => return error(StatusCode::BAD_REQUEST, msg),
    };
    let stream = params.stream;
    if stream {
        return streaming_turn(app, req);
    }
    let engine = app.engine.clone();
    let id = req.conversation_id.clone();
    let res = tokio::task::spawn_blocking(move || engine.converse(&req.conversation_id, &req.user_text, &mut |_| {}).map(|r| (r, req.trace))).await;
    match res {
        Ok(Ok((r, with_trace))) => Json(TurnReply::from_result(&r, with_trace)).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("conversation {id}: {e}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("conversation {id}: {e}")),
    }
}

fn line(ev: &StreamEvent) -> Result<Bytes, Infallible> {
    let mut s = serde_json::to_string(ev).expect("stream events serialize");
    s.push('\n');
    Ok(Bytes::from(s))
}

fn streaming_turn(app: AppState, req: TurnRequest) -> Response {
    let (tx, rx) = mpsc::unbounded_channel();
    let engine = app.engine.clone();
    tokio::task::spawn_blocking(move || {
        let ground_tx = tx.clone();
        let mut on_ground = |g: &str| {
            let _ = ground_tx.send(line(&StreamEvent::Ground { text: g.to_string() }));
        };
        let ev = match engine.converse(&req.conversation_id, &req.user_text, &mut on_ground) {
            Ok(r) => StreamEvent::Reply(TurnReply::from_result(&r, req.trace)),
            Err(e) => StreamEvent::Error { message: e.to_string() },
        };
        let _ = tx.send(line(&ev));
    });
    let body = futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|item| (item, rx)) });
    Response::builder()
        .header(header::CONTENT_TYPE, "application/x-ndjson")
        .body(Body::from_stream(body))
        .expect("static response parts")
}

async fn trace(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    match app.engine.traces(&id) {
        Some(t) => Json(t).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no conversation `{id}`")),
    }
}

async fn health(State(app): State<AppState>) -> Response {
    let cfg = app.engine.config();
    let packs = BTreeMap::from([(cfg.name.clone(), cfg.version.clone())]);
    let rgs: Vec<&str> = app.engine.registry().entries().iter().map(|(id, _)| id.as_str()).collect();
    Json(json!({ "status": "ok", "packs": packs, "rgs": rgs })).into_response()
}

/// Binds and serves until ctrl-c.
pub async fn serve(engine: Arc<Engine>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
