//! Resource-oriented HTTP endpoints over an [`Engine`].
//!
//! Bodies use the engine's canonical JSON forms. Provider-backed endpoints
//! (generations, style refresh) answer synchronously by default; with
//! `?mode=async` they return `202 Accepted` and a job id to poll at
//! `GET /jobs/{id}`.

use std::sync::{Arc, Mutex};

use axum::extract::{FromRequest, FromRequestParts, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use quillmate_core::engine::Engine;
use quillmate_core::gateway::{Bindings, TemplateId};
use quillmate_core::generation::ResolveAction;
use quillmate_core::model::{DocumentId, GenerationId, HighlightId, Page, Polarity, SessionId, Settings, StyleId};
use quillmate_core::richtext::{RichText, TextRange};
use quillmate_core::style::parse_markdown;

use crate::error::ApiError;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct ApiJson<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
pub struct ApiPath<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct ApiQuery<T>(pub T);

/// One row of the endpoint contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub method: &'static str,
    pub path: &'static str,
    pub operation: &'static str,
}

const fn route(method: &'static str, path: &'static str, operation: &'static str) -> Route {
    Route { method, path, operation }
}

/// Every engine operation and the single endpoint that serves it.
pub const ROUTES: &[Route] = &[
    route("POST", "/documents", "create_document"),
    route("GET", "/documents", "list_documents"),
    route("GET", "/documents/{id}", "get_document"),
    route("PUT", "/documents/{id}", "update_document"),
    route("POST", "/documents/{id}/reanchor", "reanchor"),
    route("GET", "/style", "current_style"),
    route("PUT", "/style", "edit_style_directly"),
    route("POST", "/style/refresh", "force_refresh"),
    route("GET", "/style/history", "history"),
    route("POST", "/style/revert/{id}", "revert_style"),
    route("PUT", "/style/locks", "set_locks"),
    route("GET", "/context", "get_context"),
    route("PUT", "/context", "set_context"),
    route("POST", "/highlights", "add_highlight"),
    route("POST", "/highlights/manual", "add_manual_highlight"),
    route("GET", "/highlights", "list_highlights"),
    route("PATCH", "/highlights/{id}", "set_active"),
    route("DELETE", "/highlights/{id}", "delete_highlight"),
    route("GET", "/highlights/summaries", "summarize_active"),
    route("POST", "/generations/rewrite", "rewrite"),
    route("POST", "/generations/apply", "apply_prompt"),
    route("POST", "/generations/continue", "continue_text"),
    route("POST", "/generations/inline", "inline_prompt"),
    route("GET", "/generations/{id}", "get_generation"),
    route("POST", "/generations/{id}/resolve", "resolve"),
    route("GET", "/telemetry/events", "events"),
    route("GET", "/telemetry/counts", "counts"),
    route("GET", "/telemetry/timeline", "timeline"),
    route("POST", "/telemetry/sessions", "start_session"),
    route("POST", "/telemetry/page-views", "record_page_view"),
    route("GET", "/settings", "get_settings"),
    route("PUT", "/settings", "update_settings"),
    route("POST", "/evaluations", "self_evaluate"),
    route("GET", "/snapshot", "snapshot"),
];

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Job {
    Pending,
    Done { result: Value },
    Failed { kind: String, message: String, http_status: u16 },
}

pub struct AppState {
    pub engine: Arc<Engine>,
    jobs: Mutex<Vec<Job>>,
}

type Shared = Arc<AppState>;
type ApiResult = Result<Response, ApiError>;

pub fn router(engine: Arc<Engine>) -> Router {
    let state = Arc::new(AppState {
        engine,
        jobs: Mutex::new(Vec::new()),
    });
    Router::new()
        .route("/documents", post(create_document).get(list_documents))
        .route("/documents/{id}", get(get_document).put(update_document))
        .route("/documents/{id}/reanchor", post(reanchor))
        .route("/style", get(current_style).put(edit_style))
        .route("/style/refresh", post(force_refresh))
        .route("/style/history", get(history))
        .route("/style/revert/{id}", post(revert_style))
        .route("/style/locks", put(set_locks))
        .route("/context", get(get_context).put(set_context))
        .route("/highlights", post(add_highlight).get(list_highlights))
        .route("/highlights/manual", post(add_manual_highlight))
        .route("/highlights/summaries", get(summarize_active))
        .route("/highlights/{id}", patch(set_active).delete(delete_highlight))
        .route("/generations/rewrite", post(rewrite))
        .route("/generations/apply", post(apply_prompt))
        .route("/generations/continue", post(continue_text))
        .route("/generations/inline", post(inline_prompt))
        .route("/generations/{id}", get(get_generation))
        .route("/generations/{id}/resolve", post(resolve))
        .route("/telemetry/events", get(events))
        .route("/telemetry/counts", get(counts))
        .route("/telemetry/timeline", get(timeline))
        .route("/telemetry/sessions", post(start_session))
        .route("/telemetry/page-views", post(record_page_view))
        .route("/settings", get(get_settings).put(update_settings))
        .route("/evaluations", post(self_evaluate))
        .route("/snapshot", get(snapshot))
        .route("/jobs/{id}", get(get_job))
        .with_state(state)
}

/// Runs a blocking engine call off the async runtime.
async fn blocking<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> quillmate_core::Result<T> + Send + 'static,
{
    let engine = state.engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

fn ok<T: Serialize>(value: T) -> ApiResult {
    Ok(Json(value).into_response())
}

fn created<T: Serialize>(value: T) -> ApiResult {
    Ok((StatusCode::CREATED, Json(value)).into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct ModeQuery {
    #[serde(default)]
    pub mode: Option<String>,
}

impl ModeQuery {
    fn is_async(&self) -> Result<bool, ApiError> {
        match self.mode.as_deref() {
            None | Some("sync") => Ok(false),
            Some("async") => Ok(true),
            Some(other) => Err(ApiError::bad_request("InvalidRequest", format!("unknown mode {other:?}"))),
        }
    }
}

/// Runs a provider-backed call either inline or as a pollable job.
async fn maybe_async<T, F>(state: Shared, mode: ModeQuery, status: StatusCode, f: F) -> ApiResult
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Engine) -> quillmate_core::Result<T> + Send + 'static,
{
    if !mode.is_async()? {
        let value = blocking(&state, f).await?;
        return Ok((status, Json(value)).into_response());
    }
    let id = {
        let mut jobs = state.jobs.lock().expect("job table poisoned");
        jobs.push(Job::Pending);
        jobs.len()
    };
    let worker = state.clone();
    tokio::spawn(async move {
        let job = match blocking(&worker, f).await {
            Ok(v) => Job::Done {
                result: serde_json::to_value(v).unwrap_or(Value::Null),
            },
            Err(e) => Job::Failed {
                kind: e.kind,
                message: e.message,
                http_status: e.status.as_u16(),
            },
        };
        worker.jobs.lock().expect("job table poisoned")[id - 1] = job;
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": id, "status": "pending", "poll": format!("/jobs/{id}") })),
    )
        .into_response())
}

async fn get_job(State(s): State<Shared>, ApiPath(id): ApiPath<usize>) -> ApiResult {
    let jobs = s.jobs.lock().expect("job table poisoned");
    match id.checked_sub(1).and_then(|i| jobs.get(i)) {
        Some(job) => ok(job),
        None => Err(ApiError::not_found("UnknownJob", format!("unknown job {id}"))),
    }
}

/// Rich text in canonical form, or a plain string (one paragraph per line).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BodyInput {
    Plain(String),
    Rich(RichText),
}

impl BodyInput {
    fn into_rich(self) -> Result<RichText, ApiError> {
        match self {
            BodyInput::Plain(s) => Ok(RichText::from_plain(&s)),
            BodyInput::Rich(r) => {
                r.validate().map_err(quillmate_core::Error::from)?;
                Ok(r)
            }
        }
    }
}

// documents

#[derive(Deserialize)]
struct CreateDocument {
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: Option<BodyInput>,
}

async fn create_document(State(s): State<Shared>, ApiJson(req): ApiJson<CreateDocument>) -> ApiResult {
    let body = req.body.map(BodyInput::into_rich).transpose()?.unwrap_or_default();
    created(blocking(&s, move |e| e.create_document(&req.title, body)).await?)
}

async fn list_documents(State(s): State<Shared>) -> ApiResult {
    ok(blocking(&s, |e| Ok(e.list_documents())).await?)
}

async fn get_document(State(s): State<Shared>, ApiPath(id): ApiPath<u64>) -> ApiResult {
    ok(blocking(&s, move |e| e.get_document(DocumentId(id))).await?)
}

#[derive(Deserialize)]
struct UpdateDocument {
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    body: Option<BodyInput>,
}

async fn update_document(
    State(s): State<Shared>,
    ApiPath(id): ApiPath<u64>,
    ApiJson(req): ApiJson<UpdateDocument>,
) -> ApiResult {
    let body = req.body.map(BodyInput::into_rich).transpose()?;
    ok(blocking(&s, move |e| e.update_document(DocumentId(id), req.title, body)).await?)
}

async fn reanchor(State(s): State<Shared>, ApiPath(id): ApiPath<u64>) -> ApiResult {
    ok(blocking(&s, move |e| e.reanchor(DocumentId(id))).await?)
}

// style

async fn current_style(State(s): State<Shared>) -> ApiResult {
    ok(blocking(&s, |e| Ok(e.current_style())).await?)
}

#[derive(Deserialize)]
struct EditStyle {
    /// Canonical rich text, or markdown with one heading per section.
    description: BodyInput,
}

async fn edit_style(State(s): State<Shared>, ApiJson(req): ApiJson<EditStyle>) -> ApiResult {
    let description = match req.description {
        BodyInput::Plain(md) => parse_markdown(&md),
        rich => rich.into_rich()?,
    };
    ok(blocking(&s, move |e| e.edit_style_directly(&description)).await?)
}

#[derive(Deserialize)]
struct Refresh {
    document_id: DocumentId,
}

async fn force_refresh(
    State(s): State<Shared>,
    ApiQuery(mode): ApiQuery<ModeQuery>,
    ApiJson(req): ApiJson<Refresh>,
) -> ApiResult {
    maybe_async(s, mode, StatusCode::OK, move |e| e.force_refresh(req.document_id)).await
}

async fn history(State(s): State<Shared>) -> ApiResult {
    ok(blocking(&s, |e| Ok(e.history())).await?)
}

async fn revert_style(State(s): State<Shared>, ApiPath(id): ApiPath<u64>) -> ApiResult {
    ok(blocking(&s, move |e| e.revert_style(StyleId(id))).await?)
}

#[derive(Deserialize)]
struct Locks {
    #[serde(default)]
    global_style_lock: Option<bool>,
    #[serde(default)]
    document_id: Option<DocumentId>,
    #[serde(default)]
    track_style: Option<bool>,
}

async fn set_locks(State(s): State<Shared>, ApiJson(req): ApiJson<Locks>) -> ApiResult {
    ok(blocking(&s, move |e| e.set_locks(req.global_style_lock, req.document_id, req.track_style)).await?)
}

// context

async fn get_context(State(s): State<Shared>) -> ApiResult {
    ok(blocking(&s, |e| Ok(e.get_context())).await?)
}

#[derive(Deserialize)]
struct SetContext {
    body: BodyInput,
}

async fn set_context(State(s): State<Shared>, ApiJson(req): ApiJson<SetContext>) -> ApiResult {
    let body = req.body.into_rich()?;
    ok(blocking(&s, move |e| e.set_context(body)).await?)
}

// highlights

#[derive(Deserialize)]
struct AddHighlight {
    document_id: DocumentId,
    range: TextRange,
    polarity: Polarity,
    #[serde(default)]
    reason: Option<String>,
}

async fn add_highlight(State(s): State<Shared>, ApiJson(req): ApiJson<AddHighlight>) -> ApiResult {
    created(blocking(&s, move |e| e.add_highlight(req.document_id, req.range, req.polarity, req.reason)).await?)
}

#[derive(Deserialize)]
struct ManualHighlight {
    polarity: Polarity,
    excerpt: String,
    #[serde(default)]
    reason: Option<String>,
}

async fn add_manual_highlight(State(s): State<Shared>, ApiJson(req): ApiJson<ManualHighlight>) -> ApiResult {
    created(blocking(&s, move |e| e.add_manual_highlight(req.polarity, &req.excerpt, req.reason)).await?)
}

async fn list_highlights(State(s): State<Shared>) -> ApiResult {
    ok(blocking(&s, |e| Ok(e.list_highlights())).await?)
}

#[derive(Deserialize)]
struct SetActive {
    active: bool,
}

async fn set_active(
    State(s): State<Shared>,
    ApiPath(id): ApiPath<u64>,
    ApiJson(req): ApiJson<SetActive>,
) -> ApiResult {
    ok(blocking(&s, move |e| e.set_active(HighlightId(id), req.active)).await?)
}

async fn delete_highlight(State(s): State<Shared>, ApiPath(id): ApiPath<u64>) -> ApiResult {
    blocking(&s, move |e| e.delete_highlight(HighlightId(id))).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn summarize_active(State(s): State<Shared>) -> ApiResult {
    ok(blocking(&s, |e| e.summarize_active()).await?)
}

// generations

#[derive(Deserialize)]
struct SelectionRequest {
    document_id: DocumentId,
    selection: TextRange,
    #[serde(default)]
    instruction: Option<String>,
}

#[derive(Deserialize)]
struct PointRequest {
    document_id: DocumentId,
    point: usize,
    #[serde(default)]
    instruction: Option<String>,
}

async fn rewrite(
    State(s): State<Shared>,
    ApiQuery(mode): ApiQuery<ModeQuery>,
    ApiJson(req): ApiJson<SelectionRequest>,
) -> ApiResult {
    if req.instruction.is_some() {
        return Err(ApiError::bad_request("InvalidRequest", "rewrite takes no instruction"));
    }
    maybe_async(s, mode, StatusCode::CREATED, move |e| e.rewrite(req.document_id, req.selection)).await
}

async fn apply_prompt(
    State(s): State<Shared>,
    ApiQuery(mode): ApiQuery<ModeQuery>,
    ApiJson(req): ApiJson<SelectionRequest>,
) -> ApiResult {
    let instruction = req.instruction.unwrap_or_default();
    maybe_async(s, mode, StatusCode::CREATED, move |e| {
        e.apply_prompt(req.document_id, req.selection, &instruction)
    })
    .await
}

async fn continue_text(
    State(s): State<Shared>,
    ApiQuery(mode): ApiQuery<ModeQuery>,
    ApiJson(req): ApiJson<PointRequest>,
) -> ApiResult {
    if req.instruction.is_some() {
        return Err(ApiError::bad_request("InvalidRequest", "continue takes no instruction"));
    }
    maybe_async(s, mode, StatusCode::CREATED, move |e| e.continue_text(req.document_id, req.point)).await
}

async fn inline_prompt(
    State(s): State<Shared>,
    ApiQuery(mode): ApiQuery<ModeQuery>,
    ApiJson(req): ApiJson<PointRequest>,
) -> ApiResult {
    let instruction = req.instruction.unwrap_or_default();
    maybe_async(s, mode, StatusCode::CREATED, move |e| {
        e.inline_prompt(req.document_id, req.point, &instruction)
    })
    .await
}

async fn get_generation(State(s): State<Shared>, ApiPath(id): ApiPath<u64>) -> ApiResult {
    ok(blocking(&s, move |e| e.get_generation(GenerationId(id))).await?)
}

#[derive(Deserialize)]
struct Resolve {
    action: ResolveAction,
}

async fn resolve(
    State(s): State<Shared>,
    ApiPath(id): ApiPath<u64>,
    ApiQuery(mode): ApiQuery<ModeQuery>,
    ApiJson(req): ApiJson<Resolve>,
) -> ApiResult {
    maybe_async(s, mode, StatusCode::OK, move |e| e.resolve(GenerationId(id), req.action)).await
}

// telemetry

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from_seq: u64,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    100
}

const MAX_PAGE: usize = 1000;

async fn events(State(s): State<Shared>, ApiQuery(q): ApiQuery<EventsQuery>) -> ApiResult {
    if q.limit == 0 || q.limit > MAX_PAGE {
        return Err(ApiError::bad_request("InvalidRequest", format!("limit must be within 1..={MAX_PAGE}")));
    }
    ok(blocking(&s, move |e| Ok(e.events(q.from_seq, q.limit))).await?)
}

#[derive(Deserialize)]
struct CountsQuery {
    #[serde(default)]
    session: Option<u64>,
    #[serde(default)]
    split: Option<String>,
}

async fn counts(State(s): State<Shared>, ApiQuery(q): ApiQuery<CountsQuery>) -> ApiResult {
    let halves = match q.split.as_deref() {
        None | Some("none") => false,
        Some("halves") => true,
        Some(other) => return Err(ApiError::bad_request("InvalidRequest", format!("unknown split {other:?}"))),
    };
    ok(blocking(&s, move |e| {
        let session = q.session.map(SessionId).unwrap_or_else(|| e.current_session());
        e.counts(session, halves)
    })
    .await?)
}

#[derive(Deserialize)]
struct TimelineQuery {
    #[serde(default)]
    session: Option<u64>,
    #[serde(default)]
    format: Option<String>,
}

async fn timeline(State(s): State<Shared>, ApiQuery(q): ApiQuery<TimelineQuery>) -> ApiResult {
    let csv = match q.format.as_deref() {
        None | Some("json") => false,
        Some("csv") => true,
        Some(other) => return Err(ApiError::bad_request("InvalidRequest", format!("unknown format {other:?}"))),
    };
    let export = blocking(&s, move |e| {
        let session = q.session.map(SessionId).unwrap_or_else(|| e.current_session());
        e.timeline(session)
    })
    .await?;
    if csv {
        Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], export.to_csv()).into_response())
    } else {
        ok(export)
    }
}

async fn start_session(State(s): State<Shared>) -> ApiResult {
    let id = blocking(&s, |e| e.start_session()).await?;
    created(json!({ "session_id": id }))
}

#[derive(Deserialize)]
struct PageView {
    page: Page,
}

async fn record_page_view(State(s): State<Shared>, ApiJson(req): ApiJson<PageView>) -> ApiResult {
    let seq = blocking(&s, move |e| e.record_page_view(req.page)).await?;
    created(json!({ "seq": seq }))
}

// settings, evaluation, snapshot

async fn get_settings(State(s): State<Shared>) -> ApiResult {
    ok(blocking(&s, |e| Ok(e.get_settings())).await?)
}

async fn update_settings(State(s): State<Shared>, ApiJson(settings): ApiJson<Settings>) -> ApiResult {
    ok(blocking(&s, move |e| e.update_settings(settings)).await?)
}

#[derive(Deserialize)]
struct Evaluate {
    #[serde(default)]
    label: String,
    task: TemplateId,
    inputs: Bindings,
    output: String,
}

async fn self_evaluate(State(s): State<Shared>, ApiJson(req): ApiJson<Evaluate>) -> ApiResult {
    ok(blocking(&s, move |e| e.self_evaluate(&req.label, req.task, &req.inputs, &req.output)).await?)
}

async fn snapshot(State(s): State<Shared>) -> ApiResult {
    ok(blocking(&s, |e| Ok(e.snapshot())).await?)
}
