use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use cellvault_core::alert::AlertRule;
use cellvault_core::analytics::DEFAULT_RETIREMENT_WINDOW;
use cellvault_core::audit::{AuditFilter, ChangeManifest};
use cellvault_core::diff::WatchConfig;
use cellvault_core::ingest::{ingest_bytes, ingest_csv_workbook, ingest_json, ingest_ooxml};
use cellvault_core::model::{CellAddress, Region};
use cellvault_core::store::{CommitMeta, CommitReceipt, Store};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::extract::{ApiBody, ApiPath, ApiQuery};

const DEFAULT_ACTOR: &str = "api";
const DEFAULT_HISTORY_WINDOW: usize = 10;

#[derive(Clone)]
struct AppState {
    store: Store,
}

/// Builds the `/api/v1` router over `store`.
///
/// With a `token`, every request must carry `Authorization: Bearer <token>`.
pub fn router(store: Store, token: Option<String>, body_limit: usize) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/workbooks", get(list_workbooks))
        .route(
            "/workbooks/{wid}/commits",
            get(list_commits).post(create_commit),
        )
        .route("/workbooks/{wid}/diff", get(diff))
        .route("/workbooks/{wid}/cells/{sheet}/{a1}/history", get(history))
        .route("/workbooks/{wid}/rules", get(list_rules).post(add_rule))
        .route("/workbooks/{wid}/alerts", get(alerts))
        .route("/workbooks/{wid}/restore", axum::routing::post(restore))
        .route("/workbooks/{wid}/export", get(export))
        .route("/workbooks/{wid}/reports/retirement", get(retirement))
        .route(
            "/workbooks/{wid}/manifests",
            get(list_manifests).post(register_manifest),
        )
        .route("/workbooks/{wid}/compliance", get(compliance))
        .route("/workbooks/{wid}/audit", get(audit))
        .route("/workbooks/{wid}/watch", get(get_watch).put(put_watch))
        .with_state(AppState { store });
    let api = match token {
        Some(token) => api.layer(middleware::from_fn_with_state(
            Arc::<str>::from(token),
            require_token,
        )),
        None => api,
    };
    Router::new()
        .nest("/api/v1", api)
        .fallback(unknown_route)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(body_limit))
}

async fn unknown_route() -> ApiError {
    ApiError::not_found("no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "METHOD_NOT_ALLOWED",
        "method not allowed on this endpoint",
    )
}

fn same_secret(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn require_token(State(token): State<Arc<str>>, req: Request, next: Next) -> Response {
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match presented {
        Some(t) if same_secret(t.as_bytes(), token.as_bytes()) => next.run(req).await,
        _ => {
            let mut resp = ApiError::new(
                StatusCode::UNAUTHORIZED,
                "UNAUTHORIZED",
                "missing or invalid bearer token",
            )
            .into_response();
            resp.headers_mut()
                .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
            resp
        }
    }
}

/// Runs a store operation off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> cellvault_core::Result<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
        .map_err(ApiError::from)
}

fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let body = serde_json::to_vec(value).expect("payload serializes");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

type ApiResult = Result<Response, ApiError>;

fn default_actor() -> String {
    DEFAULT_ACTOR.to_string()
}

fn default_at() -> String {
    "latest".to_string()
}

#[derive(Deserialize)]
struct ActorQuery {
    #[serde(default = "default_actor")]
    actor: String,
}

async fn health() -> Response {
    json(StatusCode::OK, &serde_json::json!({ "status": "ok" }))
}

async fn list_workbooks(State(s): State<AppState>) -> ApiResult {
    let ids = blocking(move || s.store.workbooks()).await?;
    Ok(json(StatusCode::OK, &ids))
}

#[derive(Deserialize)]
struct CommitQuery {
    author: String,
    #[serde(default)]
    message: String,
    #[serde(default)]
    source: String,
    timestamp: Option<String>,
    /// `json`, `xlsx`, or `csv`; sniffed from the bytes when absent.
    format: Option<String>,
    /// Sheet name for CSV bodies.
    sheet: Option<String>,
}

async fn create_commit(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(q): ApiQuery<CommitQuery>,
    ApiBody(body): ApiBody,
) -> ApiResult {
    let outcome = blocking(move || {
        let report = match q.format.as_deref() {
            None => ingest_bytes(&body)?,
            Some("json") => ingest_json(&body)?,
            Some("xlsx") => ingest_ooxml(&body)?,
            Some("csv") => ingest_csv_workbook(q.sheet.as_deref().unwrap_or("Sheet1"), &body)?,
            Some(other) => {
                return Err(cellvault_core::Error::InvalidArgument(format!(
                    "unknown format {other:?}"
                )))
            }
        };
        let meta = CommitMeta {
            author: q.author,
            message: q.message,
            source: q.source,
            timestamp: q.timestamp,
        };
        s.store.commit(&wid, &report.snapshot, meta)
    })
    .await?;
    Ok(json(StatusCode::CREATED, &CommitReceipt::from(&outcome)))
}

async fn list_commits(State(s): State<AppState>, ApiPath(wid): ApiPath<String>) -> ApiResult {
    let log = blocking(move || s.store.log(&wid)).await?;
    Ok(json(StatusCode::OK, &log))
}

#[derive(Deserialize)]
struct DiffQuery {
    from: String,
    #[serde(default = "default_at")]
    to: String,
}

async fn diff(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(q): ApiQuery<DiffQuery>,
) -> ApiResult {
    let changes = blocking(move || s.store.diff_commits(&wid, &q.from, &q.to)).await?;
    Ok(json(StatusCode::OK, &changes))
}

#[derive(Deserialize)]
struct WindowQuery {
    window: Option<usize>,
}

async fn history(
    State(s): State<AppState>,
    ApiPath((wid, sheet, a1)): ApiPath<(String, String, String)>,
    ApiQuery(q): ApiQuery<WindowQuery>,
) -> ApiResult {
    let window = q.window.unwrap_or(DEFAULT_HISTORY_WINDOW);
    let series = blocking(move || {
        let address = CellAddress::from_a1(sheet, &a1)?;
        s.store.cell_history(&wid, &address, window)
    })
    .await?;
    Ok(json(StatusCode::OK, &series))
}

async fn list_rules(State(s): State<AppState>, ApiPath(wid): ApiPath<String>) -> ApiResult {
    let rules = blocking(move || s.store.rules(&wid)).await?;
    Ok(json(StatusCode::OK, &rules))
}

#[derive(Serialize)]
struct RuleCreated {
    rule_id: String,
}

async fn add_rule(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(q): ApiQuery<ActorQuery>,
    body: ApiBody,
) -> ApiResult {
    let rule: AlertRule = body.json()?;
    let rule_id = blocking(move || s.store.add_rule(&wid, rule, &q.actor)).await?;
    Ok(json(StatusCode::CREATED, &RuleCreated { rule_id }))
}

async fn alerts(State(s): State<AppState>, ApiPath(wid): ApiPath<String>) -> ApiResult {
    let firings = blocking(move || s.store.alerts(&wid)).await?;
    Ok(json(StatusCode::OK, &firings))
}

#[derive(Deserialize)]
struct RestoreRequest {
    commit_id: String,
    #[serde(default = "default_actor")]
    actor: String,
}

async fn restore(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    body: ApiBody,
) -> ApiResult {
    let req: RestoreRequest = body.json()?;
    let bytes = blocking(move || s.store.restore(&wid, &req.commit_id, &req.actor)).await?;
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/json")],
        bytes,
    )
        .into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    region: String,
    #[serde(default = "default_at")]
    at: String,
    format: Option<String>,
}

async fn export(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(q): ApiQuery<ExportQuery>,
) -> ApiResult {
    let csv = match q.format.as_deref() {
        None | Some("json") => false,
        Some("csv") => true,
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "unknown export format {other:?}"
            )))
        }
    };
    let table = blocking(move || {
        let region: Region = q.region.parse()?;
        s.store.export_region(&wid, &q.at, &region)
    })
    .await?;
    if csv {
        Ok((
            StatusCode::OK,
            [(header::CONTENT_TYPE, "text/csv; charset=utf-8")],
            table.to_csv(),
        )
            .into_response())
    } else {
        Ok(json(StatusCode::OK, &table))
    }
}

async fn retirement(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(q): ApiQuery<WindowQuery>,
) -> ApiResult {
    let window = q.window.unwrap_or(DEFAULT_RETIREMENT_WINDOW);
    let report = blocking(move || s.store.retirement_report(&wid, window)).await?;
    Ok(json(StatusCode::OK, &report))
}

async fn list_manifests(State(s): State<AppState>, ApiPath(wid): ApiPath<String>) -> ApiResult {
    let manifests = blocking(move || s.store.manifests(&wid)).await?;
    Ok(json(StatusCode::OK, &manifests))
}

async fn register_manifest(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(q): ApiQuery<ActorQuery>,
    body: ApiBody,
) -> ApiResult {
    let manifest: ChangeManifest = body.json()?;
    let stored = blocking(move || {
        s.store.register_manifest(&wid, &manifest, &q.actor)?;
        Ok(manifest)
    })
    .await?;
    Ok(json(StatusCode::CREATED, &stored))
}

#[derive(Deserialize)]
struct ComplianceQuery {
    manifest: String,
    from: Option<String>,
    #[serde(default = "default_at")]
    to: String,
    #[serde(default = "default_actor")]
    actor: String,
}

async fn compliance(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(q): ApiQuery<ComplianceQuery>,
) -> ApiResult {
    let report = blocking(move || {
        s.store
            .check_compliance(&wid, &q.manifest, q.from.as_deref(), &q.to, &q.actor)
    })
    .await?;
    Ok(json(StatusCode::OK, &report))
}

async fn audit(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(filter): ApiQuery<AuditFilter>,
) -> ApiResult {
    let entries = blocking(move || s.store.audit_query(&wid, &filter)).await?;
    Ok(json(StatusCode::OK, &entries))
}

async fn get_watch(State(s): State<AppState>, ApiPath(wid): ApiPath<String>) -> ApiResult {
    let config = blocking(move || s.store.watch_config(&wid)).await?;
    Ok(json(StatusCode::OK, &config))
}

async fn put_watch(
    State(s): State<AppState>,
    ApiPath(wid): ApiPath<String>,
    ApiQuery(q): ApiQuery<ActorQuery>,
    body: ApiBody,
) -> ApiResult {
    let config: WatchConfig = body.json()?;
    let stored = blocking(move || {
        s.store.set_watch_config(&wid, &config, &q.actor)?;
        Ok(config)
    })
    .await?;
    Ok(json(StatusCode::OK, &stored))
}
