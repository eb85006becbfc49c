//! Local HTTP endpoint for the verification workbench.
//!
//! Reads take a shared lock on the current inventory; decision writes go
//! through one write lock that persists before the inventory is replaced,
//! so a request issued after a POST returns observes it.

use std::collections::BTreeMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::classification::ClassificationTable;
use crate::cli::{load_session, merged_inventory, CliError, RunConfig};
use crate::geo::export_geojson;
use crate::nace::Taxonomy;
use crate::report::{ReportFilter, ReportLevel, ReportQuery, Reporter};
use crate::scoping::{decisions_to_json, parse_decisions, Inventory, ScopeMode, VerificationDecision, VerificationError, VerificationStatus};

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>flw-scope</title></head>\n<body><h1>flw-scope</h1><p>Dataset: <a href=\"/api/dataset\">/api/dataset</a>. Report: <a href=\"/api/report?level=step\">/api/report</a>.</p></body></html>\n";

struct Live {
    inventory: Inventory,
    decisions: Vec<VerificationDecision>,
}

/// Everything a served instance needs; cheap to clone.
#[derive(Clone)]
pub struct ServeState {
    taxonomy: Arc<Taxonomy>,
    classification: Arc<ClassificationTable>,
    live: Arc<RwLock<Live>>,
    decisions_path: Option<PathBuf>,
    mode: ScopeMode,
    categorize_by: ReportLevel,
    assets: Option<PathBuf>,
}

impl ServeState {
    pub fn new(
        taxonomy: Taxonomy,
        classification: ClassificationTable,
        inventory: Inventory,
        decisions_path: Option<PathBuf>,
        mode: ScopeMode,
        categorize_by: ReportLevel,
    ) -> Self {
        ServeState {
            taxonomy: Arc::new(taxonomy),
            classification: Arc::new(classification),
            live: Arc::new(RwLock::new(Live { inventory, decisions: Vec::new() })),
            decisions_path,
            mode,
            categorize_by,
            assets: None,
        }
    }

    /// Build the merged inventory and replay decisions already on disk.
    pub fn from_config(config: &RunConfig, categorize_by: ReportLevel, assets: Option<PathBuf>) -> Result<Self, CliError> {
        let session = load_session(config)?;
        let inventory = merged_inventory(&session)?;
        let mut state = ServeState::new(
            session.taxonomy,
            session.classification,
            inventory,
            config.decisions_path.clone(),
            config.mode,
            categorize_by,
        );
        state.live.write().expect("fresh lock").decisions = session.decisions;
        state.assets = assets;
        Ok(state)
    }

    pub fn with_assets(mut self, dir: impl Into<PathBuf>) -> Self {
        self.assets = Some(dir.into());
        self
    }

    pub fn entity_count(&self) -> usize {
        self.live.read().expect("lock poisoned").inventory.entries.len()
    }
}

pub fn router(state: ServeState) -> Router {
    Router::new()
        .route("/api/dataset", get(dataset))
        .route("/api/report", get(report))
        .route("/api/decisions", post(decisions).get(list_decisions))
        .fallback(get(assets))
        .with_state(state)
}

/// Bind to loopback and serve until interrupted.
pub async fn serve(state: ServeState, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(SocketAddr::from((Ipv4Addr::LOCALHOST, port))).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub fn run_blocking(state: ServeState, port: u16) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(state, port))
}

fn bad_request(message: impl Into<String>) -> Response {
    error_response(StatusCode::BAD_REQUEST, message)
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Deserialize)]
struct DatasetParams {
    mode: Option<String>,
    categorize_by: Option<String>,
}

async fn dataset(State(state): State<ServeState>, Query(params): Query<DatasetParams>) -> Response {
    let mode = match params.mode.as_deref().map(str::parse::<ScopeMode>).transpose() {
        Ok(m) => m.unwrap_or(state.mode),
        Err(e) => return bad_request(e),
    };
    let level = match params.categorize_by.as_deref().map(str::parse::<ReportLevel>).transpose() {
        Ok(l) => l.unwrap_or(state.categorize_by),
        Err(e) => return bad_request(e),
    };
    let body = {
        let live = state.live.read().expect("lock poisoned");
        export_geojson(&live.inventory, &state.taxonomy, mode, level).to_geojson()
    };
    ([(header::CONTENT_TYPE, "application/geo+json")], body).into_response()
}

#[derive(Debug, Deserialize)]
struct ReportParams {
    level: Option<String>,
    filter: Option<String>,
    mode: Option<String>,
}

async fn report(State(state): State<ServeState>, Query(params): Query<ReportParams>) -> Response {
    let level = match params.level.as_deref().filter(|s| !s.is_empty()).map(str::parse::<ReportLevel>).transpose() {
        Ok(l) => l.unwrap_or(ReportLevel::Step),
        Err(e) => return bad_request(e),
    };
    let mode = match params.mode.as_deref().filter(|s| !s.is_empty()).map(str::parse::<ScopeMode>).transpose() {
        Ok(m) => m.unwrap_or(state.mode),
        Err(e) => return bad_request(e),
    };
    let filter = match params.filter.as_deref().filter(|s| !s.is_empty()).map(str::parse::<ReportFilter>).transpose() {
        Ok(f) => f,
        Err(e) => return bad_request(e),
    };
    let query = ReportQuery { level, mode, filter, keep_zeros: false };
    let reporter = Reporter::new(&state.taxonomy, &state.classification);
    let live = state.live.read().expect("lock poisoned");
    match reporter.aggregate(&live.inventory, &query) {
        Ok(table) => Json(table).into_response(),
        Err(e) => bad_request(e.to_string()),
    }
}

fn status_counts_json(inventory: &Inventory) -> serde_json::Value {
    let counts = inventory.status_counts();
    let map: BTreeMap<&str, usize> =
        VerificationStatus::ALL.iter().map(|s| (s.as_str(), counts.get(s).copied().unwrap_or(0))).collect();
    json!(map)
}

/// Write the full decision log atomically: temp file then rename.
fn persist(path: &Path, decisions: &[VerificationDecision]) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, decisions_to_json(decisions))?;
    std::fs::rename(&tmp, path)
}

async fn decisions(State(state): State<ServeState>, body: Bytes) -> Response {
    let Ok(text) = std::str::from_utf8(&body) else {
        return bad_request("body is not UTF-8");
    };
    let batch = match parse_decisions(text) {
        Ok(b) => b,
        Err(e) => return bad_request(e.to_string()),
    };
    let mut live = state.live.write().expect("lock poisoned");
    let updated = match live.inventory.apply_verifications(&batch) {
        Ok(inv) => inv,
        Err(e @ VerificationError::UnknownEntity(_)) => return error_response(StatusCode::NOT_FOUND, e.to_string()),
        Err(e @ VerificationError::NotVerifiable(_)) => return error_response(StatusCode::CONFLICT, e.to_string()),
    };
    let mut log = live.decisions.clone();
    log.extend(batch.iter().cloned());
    if let Some(path) = &state.decisions_path {
        if let Err(e) = persist(path, &log) {
            return error_response(StatusCode::INTERNAL_SERVER_ERROR, format!("cannot persist decisions: {e}"));
        }
    }
    live.inventory = updated;
    live.decisions = log;
    Json(json!({
        "applied": batch.len(),
        "status_counts": status_counts_json(&live.inventory),
    }))
    .into_response()
}

async fn list_decisions(State(state): State<ServeState>) -> Response {
    let body = decisions_to_json(&state.live.read().expect("lock poisoned").decisions);
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" => "application/json",
        "geojson" => "application/geo+json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "map" => "application/json",
        _ => "application/octet-stream",
    }
}

/// Relative path under the assets root, or None for anything escaping it.
fn asset_path(root: &Path, uri_path: &str) -> Option<PathBuf> {
    let rel = uri_path.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    rel.components().all(|c| matches!(c, Component::Normal(_))).then(|| root.join(rel))
}

async fn assets(State(state): State<ServeState>, uri: Uri) -> Response {
    let Some(root) = &state.assets else {
        return if uri.path() == "/" || uri.path() == "/index.html" {
            ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], PLACEHOLDER_PAGE).into_response()
        } else {
            error_response(StatusCode::NOT_FOUND, format!("{} not found", uri.path()))
        };
    };
    let Some(path) = asset_path(root, uri.path()) else {
        return error_response(StatusCode::NOT_FOUND, format!("{} not found", uri.path()));
    };
    match std::fs::read(&path) {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => error_response(StatusCode::NOT_FOUND, format!("{} not found", uri.path())),
    }
}
