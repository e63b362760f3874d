//! HTTP API over a finished run directory.
//!
//! The service holds no database: every request reads the run directory,
//! and the only write path is review resolution, which is serialized per
//! run and persisted with atomic file replacement.

pub mod archive;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use finrep_core::audit::{AuditRecord, Resolution, ReviewItem, ReviewState};
use finrep_core::guardrail::PROTOCOL_VERSION;
use finrep_core::mapping::{FieldStatus, StatementBundle};
use finrep_core::ontology::{Jurisdiction, OntologyCatalog, Statement};
use finrep_core::pipeline::{
    answer_template_query, company_dir, load_bundle, load_review_queue, load_run, load_trail, resolve_in_run,
    CompanySummary, PipelineError, QaError, QaQuery, ResolveError, RunSummary, ANOMALIES_FILE,
};
use serde_json::{json, Value};
use tokio::sync::Mutex;

pub use archive::{archive_name, company_archive, ArchiveError};

/// How long a resolve waits for the writer lock before answering 409.
pub const DEFAULT_RESOLVE_WAIT: Duration = Duration::from_secs(5);

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
    resolve_wait: Duration,
}

struct Inner {
    run_dir: PathBuf,
    catalog: OntologyCatalog,
    writer: Mutex<()>,
}

impl AppState {
    /// Opens a run directory. The catalog must be the one the run used.
    pub fn open(run_dir: impl Into<PathBuf>, catalog: OntologyCatalog) -> Result<Self, PipelineError> {
        let run_dir = run_dir.into();
        let summary = load_run(&run_dir)?;
        if summary.catalog_version != catalog.version {
            return Err(PipelineError::RunDir(
                run_dir,
                format!(
                    "run used catalog version {}, service loaded {}",
                    summary.catalog_version, catalog.version
                ),
            ));
        }
        Ok(Self {
            inner: Arc::new(Inner {
                run_dir,
                catalog,
                writer: Mutex::new(()),
            }),
            resolve_wait: DEFAULT_RESOLVE_WAIT,
        })
    }

    pub fn with_resolve_wait(mut self, wait: Duration) -> Self {
        self.resolve_wait = wait;
        self
    }

    pub fn run_dir(&self) -> &Path {
        &self.inner.run_dir
    }
}

/// JSON error body `{error, message}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        ApiError::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "message": self.message}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/markets", get(markets))
        .route("/markets/:market/companies", get(companies))
        .route("/companies/:market/:company/statements", get(statements))
        .route("/companies/:market/:company/export", get(export))
        .route("/qa", post(qa))
        .route("/review/queue", get(review_queue))
        .route("/review/:item", get(review_item))
        .route("/review/:item/resolve", post(resolve))
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn parse_market(raw: &str) -> ApiResult<Jurisdiction> {
    raw.parse().map_err(|e: String| ApiError::not_found(e))
}

fn run_summary(run_dir: &Path) -> ApiResult<RunSummary> {
    Ok(load_run(run_dir)?)
}

/// The stored bundle of a company listed in the run with outputs.
fn company_bundle(run_dir: &Path, market: Jurisdiction, company_id: &str) -> ApiResult<StatementBundle> {
    let summary = run_summary(run_dir)?;
    let listed = summary
        .company(market, company_id)
        .ok_or_else(|| ApiError::not_found(format!("no company {market}/{company_id}")))?;
    if !listed.ok {
        return Err(ApiError::not_found(format!(
            "company {market}/{company_id} produced no statements: {}",
            listed.error.as_deref().unwrap_or("unknown error")
        )));
    }
    Ok(load_bundle(run_dir, market, company_id)?)
}

fn load_anomalies(run_dir: &Path, market: Jurisdiction, company_id: &str) -> ApiResult<Vec<Value>> {
    let path = company_dir(run_dir, market, company_id).join(ANOMALIES_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| ApiError::internal(format!("{}: {e}", path.display()))))
        .collect()
}

async fn health(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    Ok(Json(json!({
        "status": "ok",
        "protocol": PROTOCOL_VERSION,
        "catalog_version": state.inner.catalog.version,
    })))
}

async fn markets(State(state): State<AppState>) -> ApiResult<Json<Vec<Jurisdiction>>> {
    let run_dir = state.inner.run_dir.clone();
    let summary = blocking(move || run_summary(&run_dir)).await?;
    Ok(Json(summary.markets.keys().copied().collect()))
}

async fn companies(
    State(state): State<AppState>,
    UrlPath(market): UrlPath<String>,
) -> ApiResult<Json<Vec<CompanySummary>>> {
    let market = parse_market(&market)?;
    let run_dir = state.inner.run_dir.clone();
    let summary = blocking(move || run_summary(&run_dir)).await?;
    summary
        .markets
        .get(&market)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("market {market} is not part of this run")))
}

async fn statements(
    State(state): State<AppState>,
    UrlPath((market, company)): UrlPath<(String, String)>,
) -> ApiResult<Json<Value>> {
    let market = parse_market(&market)?;
    let inner = state.inner.clone();
    blocking(move || {
        let bundle = company_bundle(&inner.run_dir, market, &company)?;
        let anomalies = load_anomalies(&inner.run_dir, market, &company)?;
        let queue = load_review_queue(&inner.run_dir)?;
        let catalog = &inner.catalog;

        let mut statements = serde_json::Map::new();
        for statement in Statement::ALL {
            let rows: Vec<Value> = bundle
                .fields_for(catalog, statement)
                .map(|f| {
                    let mut row = serde_json::to_value(f).unwrap_or(Value::Null);
                    if let Some(obj) = row.as_object_mut() {
                        let name = catalog.concept(&f.concept_id).map(|c| c.display_name.clone());
                        obj.insert("display_name".into(), json!(name));
                    }
                    row
                })
                .collect();
            statements.insert(statement.as_str().into(), Value::Array(rows));
        }
        let mut counts: BTreeMap<FieldStatus, usize> = FieldStatus::ALL.iter().map(|s| (*s, 0)).collect();
        for f in &bundle.fields {
            *counts.entry(f.status).or_default() += 1;
        }
        let review: Vec<&ReviewItem> = queue
            .items
            .iter()
            .filter(|i| i.market == market && i.company_id == company)
            .collect();
        Ok(Json(json!({
            "metadata": bundle.metadata,
            "statements": statements,
            "extras": bundle.extras,
            "anomalies": anomalies,
            "status_counts": counts,
            "review_items": review,
        })))
    })
    .await
}

async fn export(
    State(state): State<AppState>,
    UrlPath((market, company)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let market = parse_market(&market)?;
    let run_dir = state.inner.run_dir.clone();
    let name = archive_name(market, &company);
    let bytes = blocking(move || {
        company_bundle(&run_dir, market, &company)?;
        company_archive(&run_dir, market, &company).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await?;
    let disposition = HeaderValue::from_str(&format!("attachment; filename=\"{name}\""))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/zip")),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

async fn qa(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let query: QaQuery = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let inner = state.inner.clone();
    blocking(move || {
        let summary = run_summary(&inner.run_dir)?;
        let bundles = match summary.company(query.market, &query.company_id) {
            Some(c) if c.ok => vec![load_bundle(&inner.run_dir, query.market, &query.company_id)?],
            _ => Vec::new(),
        };
        match answer_template_query(&bundles, &inner.catalog, &query) {
            Ok(answer) => Ok(Json(
                serde_json::to_value(answer).map_err(|e| ApiError::internal(e.to_string()))?,
            )),
            Err(e @ QaError::UnknownCompany(..)) => Err(ApiError::not_found(e.to_string())),
            Err(e @ QaError::UnknownTemplate(_)) => Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "unknown_template",
                e.to_string(),
            )),
        }
    })
    .await
}

async fn review_queue(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let run_dir = state.inner.run_dir.clone();
    let queue = blocking(move || Ok(load_review_queue(&run_dir)?)).await?;
    Ok(Json(json!({"open": queue.open_count(), "items": queue.items})))
}

async fn review_item(State(state): State<AppState>, UrlPath(item_id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let run_dir = state.inner.run_dir.clone();
    blocking(move || {
        let queue = load_review_queue(&run_dir)?;
        let item = queue
            .get(&item_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no review item {item_id}")))?;
        let bundle = load_bundle(&run_dir, item.market, &item.company_id)?;
        let trail: Vec<AuditRecord> = load_trail(&run_dir, item.market, &item.company_id)?
            .into_iter()
            .filter(|r| r.target == item.concept_id)
            .collect();
        Ok(Json(json!({
            "item": item,
            "field": bundle.field(&item.concept_id),
            "trail": trail,
        })))
    })
    .await
}

async fn resolve(
    State(state): State<AppState>,
    UrlPath(item_id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let mut raw: Value = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let obj = raw
        .as_object_mut()
        .ok_or_else(|| ApiError::bad_request("body must be a JSON object"))?;
    obj.insert("item_id".into(), Value::String(item_id));
    let resolution: Resolution = serde_json::from_value(raw).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if resolution.reviewer.trim().is_empty() {
        return Err(ApiError::bad_request("reviewer must not be empty"));
    }

    let inner = state.inner.clone();
    let guard = tokio::time::timeout(state.resolve_wait, inner.writer.lock())
        .await
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "busy", "another resolution is in progress"))?;
    let worker = inner.clone();
    let outcome = tokio::task::spawn_blocking(move || resolve_in_run(&worker.run_dir, &worker.catalog, resolution))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    drop(guard);

    match outcome {
        Ok(o) => {
            debug_assert_eq!(o.item.state, ReviewState::Resolved);
            Ok(Json(json!({
                "item": o.item,
                "field": o.bundle.field(&o.item.concept_id),
                "audit_seq": o.audit_seq,
                "open": o.open_items,
            })))
        }
        Err(e @ ResolveError::ItemNotFound(_)) => Err(ApiError::not_found(e.to_string())),
        Err(e @ ResolveError::AlreadyResolved(_)) => {
            Err(ApiError::new(StatusCode::CONFLICT, "already_resolved", e.to_string()))
        }
        Err(e @ (ResolveError::Audit(_) | ResolveError::Pipeline(_))) => Err(ApiError::internal(e.to_string())),
    }
}
