//! HTTP routes over a [`ServiceHandle`].

use std::convert::Infallible;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use mojikit::knowledge::{
    knowledge, AffectCategory, BehaviorPrimitive, CardModule, IntentCategory, PatternFilter,
    TriggerType,
};
use mojikit::presets::load_presets;
use mojikit::sequence::{
    export_sequence, import_sequence, parse_sequence, validate_sequence, ImportError,
    ValidationReport,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::{PlayError, ServiceError, ServiceHandle, StopError, StreamEvent};

pub fn router(handle: ServiceHandle) -> Router {
    Router::new()
        .route("/presets", get(presets))
        .route("/validate", post(validate))
        .route("/play", post(play))
        .route("/stop", post(stop))
        .route("/session", get(session))
        .route("/telemetry", get(telemetry))
        .route("/tick", post(tick))
        .route("/cards", get(cards))
        .route("/cards/{id}", get(card))
        .route("/patterns", get(patterns))
        .route("/stats", get(stats))
        .with_state(handle)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    report: Option<ValidationReport>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
            report: None,
        }
    }

    fn invalid(report: ValidationReport) -> Self {
        ApiError {
            report: Some(report),
            ..ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid",
                "sequence failed validation",
            )
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let Some(report) = self.report {
            body["report"] = report_json(&report);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "engine", e.to_string())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "query", e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn report_json(report: &ValidationReport) -> Value {
    json!({ "ok": report.is_ok(), "violations": report.violations })
}

#[derive(Serialize)]
struct PresetInfo {
    name: String,
    structures: Vec<&'static str>,
    block_count: usize,
    duration_ms: u64,
    document: String,
}

async fn presets() -> Json<Vec<PresetInfo>> {
    Json(
        load_presets()
            .iter()
            .map(|seq| PresetInfo {
                name: seq.name().to_string(),
                structures: seq.structures().map(|s| s.name()).collect(),
                block_count: seq.block_count(),
                duration_ms: seq.total_duration_ms(),
                document: export_sequence(seq).expect("bundled presets are valid"),
            })
            .collect(),
    )
}

async fn validate(body: String) -> ApiResult<Json<Value>> {
    let seq = parse_sequence(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "parse", e.to_string()))?;
    Ok(Json(report_json(&validate_sequence(&seq))))
}

#[derive(Deserialize)]
struct PlayQuery {
    preset: Option<String>,
    #[serde(default)]
    replace: bool,
}

async fn play(
    State(handle): State<ServiceHandle>,
    query: Result<Query<PlayQuery>, QueryRejection>,
    body: String,
) -> ApiResult<Json<Value>> {
    let Query(query) = query?;
    let sequence = match &query.preset {
        Some(name) => load_presets().get(name).cloned().ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_preset",
                format!("no preset named {name:?}"),
            )
        })?,
        None if body.trim().is_empty() => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "parse",
                "expected a sequence document or ?preset=",
            ))
        }
        None => import_sequence(&body).map_err(|e| match e {
            ImportError::Parse(p) => ApiError::new(StatusCode::BAD_REQUEST, "parse", p.to_string()),
            ImportError::Invalid(report) => ApiError::invalid(report),
        })?,
    };
    match handle.play(sequence, query.replace).await? {
        Ok(session) => Ok(Json(json!(session))),
        Err(e @ PlayError::Busy(_)) => {
            Err(ApiError::new(StatusCode::CONFLICT, "busy", e.to_string()))
        }
        Err(PlayError::Invalid(report)) => Err(ApiError::invalid(report)),
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct StopBody {
    session_id: Option<u64>,
}

async fn stop(State(handle): State<ServiceHandle>, body: String) -> ApiResult<Json<Value>> {
    let body: StopBody = if body.trim().is_empty() {
        StopBody::default()
    } else {
        serde_json::from_str(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "body", e.to_string()))?
    };
    match handle.stop(body.session_id).await? {
        Ok(session) => Ok(Json(json!({ "session": session }))),
        Err(e @ StopError::UnknownSession(_)) => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            e.to_string(),
        )),
    }
}

#[derive(Deserialize)]
struct SessionQuery {
    id: Option<u64>,
}

async fn session(
    State(handle): State<ServiceHandle>,
    query: Result<Query<SessionQuery>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let Query(q) = query?;
    let found = handle.session(q.id).await?;
    match (q.id, found) {
        (Some(id), None) => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session with id {id}"),
        )),
        (_, found) => Ok(Json(json!({ "session": found }))),
    }
}

#[derive(Deserialize)]
struct TelemetryQuery {
    session: Option<u64>,
    decimate: Option<u64>,
}

fn sse_event(event: &StreamEvent) -> Event {
    match event {
        StreamEvent::Telemetry(t) => Event::default()
            .event("telemetry")
            .data(serde_json::to_string(t).expect("envelope serializes")),
        StreamEvent::SessionError(e) => Event::default()
            .event("error")
            .data(serde_json::to_string(e).expect("error event serializes")),
    }
}

async fn telemetry(
    State(handle): State<ServiceHandle>,
    query: Result<Query<TelemetryQuery>, QueryRejection>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let Query(q) = query?;
    let decimate = q.decimate.unwrap_or(1);
    if decimate == 0 {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "query",
            "decimate must be at least 1",
        ));
    }
    if let Some(id) = q.session {
        if handle.session(Some(id)).await?.is_none() {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_session",
                format!("no session with id {id}"),
            ));
        }
    }
    let (first, rx) = handle.subscribe().await?;
    let live = stream::unfold((rx, 0u64), move |(mut rx, mut seen)| async move {
        loop {
            match rx.recv().await {
                Ok(ev @ StreamEvent::Telemetry(_)) => {
                    seen += 1;
                    if seen % decimate == 0 {
                        return Some((Ok(sse_event(&ev)), (rx, seen)));
                    }
                }
                Ok(ev) => return Some((Ok(sse_event(&ev)), (rx, seen))),
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    let head = stream::once(async move { Ok(sse_event(&StreamEvent::Telemetry(first))) });
    Ok(Sse::new(head.chain(live)).keep_alive(KeepAlive::default()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TickBody {
    ticks: u64,
}

async fn tick(State(handle): State<ServiceHandle>, body: String) -> ApiResult<Json<Value>> {
    if !handle.is_virtual() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "wall_clock",
            "ticks are driven by the wall clock",
        ));
    }
    let body: TickBody = serde_json::from_str(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "body", e.to_string()))?;
    Ok(Json(json!(handle.advance(body.ticks).await?)))
}

#[derive(Deserialize)]
struct CardsQuery {
    module: Option<CardModule>,
}

async fn cards(query: Result<Query<CardsQuery>, QueryRejection>) -> ApiResult<Json<Value>> {
    let Query(q) = query?;
    Ok(Json(json!(knowledge().list_cards(q.module))))
}

async fn card(Path(id): Path<String>) -> ApiResult<Json<Value>> {
    knowledge()
        .lookup_card(&id)
        .map(|c| Json(json!(c)))
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "unknown_card", e.to_string()))
}

#[derive(Deserialize)]
struct PatternsQuery {
    intent: Option<IntentCategory>,
    trigger: Option<TriggerType>,
    behavior: Option<BehaviorPrimitive>,
    affect: Option<AffectCategory>,
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

async fn patterns(query: Result<Query<PatternsQuery>, QueryRejection>) -> ApiResult<Json<Value>> {
    let Query(q) = query?;
    let filter = PatternFilter {
        intent: q.intent,
        trigger: q.trigger,
        behavior: q.behavior,
        affect: q.affect,
    };
    let all = knowledge().query_patterns(&filter);
    let limit = q.limit.unwrap_or(all.len());
    let items: Vec<_> = all.iter().skip(q.offset).take(limit).collect();
    Ok(Json(json!({
        "total": all.len(),
        "offset": q.offset,
        "limit": limit,
        "items": items,
    })))
}

async fn stats() -> Json<Value> {
    Json(json!(knowledge().compute_stats()))
}
