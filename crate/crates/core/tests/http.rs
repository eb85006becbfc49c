mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::data;
use flw_scope::cli::RunConfig;
use flw_scope::serve::{router, ServeState};
use flw_scope::{FeatureDocument, ReportLevel, ScopeMode, Strictness};
use serde_json::Value;
use tower::ServiceExt;

fn config(decisions: Option<std::path::PathBuf>) -> RunConfig {
    RunConfig {
        taxonomy_path: data("nace_rev2_excerpt.csv").into(),
        classification_path: Some(data("flw_classification.csv").into()),
        classification_overrides: Default::default(),
        registries: vec![("Zamudio".into(), data("zamudio_registry.csv").into())],
        geocoder_stub_path: Some(data("zamudio_geocoder.csv").into()),
        decisions_path: decisions,
        mode: ScopeMode::IncludePending,
        strictness: Strictness::Lenient,
        outputs: Vec::new(),
    }
}

fn app(decisions: Option<std::path::PathBuf>) -> Router {
    router(ServeState::from_config(&config(decisions), ReportLevel::Step, None).unwrap())
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, String, Option<String>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let body = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(body.to_vec()).unwrap(), ctype)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, String) {
    let (s, b, _) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, b)
}

async fn post(app: &Router, body: &str) -> (StatusCode, String) {
    let req = Request::post("/api/decisions").header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    let (s, b, _) = send(app, req).await;
    (s, b)
}

fn decision(id: &str, outcome: &str) -> String {
    format!(r#"[{{"entity_id":"{id}","outcome":"{outcome}","note":"site visit","timestamp":"2024-02-01T09:30:00+01:00"}}]"#)
}

fn step_count(report: &str, step: &str) -> u64 {
    let v: Value = serde_json::from_str(report).unwrap();
    v["rows"].as_array().unwrap().iter().filter(|r| r["step"] == step).map(|r| r["count"].as_u64().unwrap()).sum()
}

#[tokio::test]
async fn dataset_has_82_features() {
    let app = app(None);
    let (status, body, ctype) = send(&app, Request::get("/api/dataset").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("application/geo+json"));
    let doc = FeatureDocument::parse(&body).unwrap();
    assert_eq!(doc.features.len(), 82);
    let (_, confirmed) = get(&app, "/api/dataset?mode=confirmed-only&categorize_by=division").await;
    let doc = FeatureDocument::parse(&confirmed).unwrap();
    assert_eq!(doc.features.len(), 76);
    assert_eq!(doc.categorize_by, ReportLevel::Division);
}

#[tokio::test]
async fn report_endpoint() {
    let app = app(None);
    let (status, body) = get(&app, "/api/report?level=Step").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["total"], 82);
    assert_eq!(v["level"], "step");
    let (_, body) = get(&app, "/api/report?level=class&filter=46").await;
    let v: Value = serde_json::from_str(&body).unwrap();
    let counts: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r["count"].as_u64().unwrap()).collect();
    assert_eq!(counts, [1, 4, 2, 7, 2, 1, 1, 6]);
    assert_eq!(v["rows"][0]["path"], serde_json::json!(["G", "46", "46.3", "46.31"]));
    let (_, body) = get(&app, "/api/report?level=section&filter=CONSUMPTION").await;
    assert_eq!(step_count(&body, "CONSUMPTION"), 38);
    assert_eq!(get(&app, "/api/report?level=county").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/report?filter=99").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/report?mode=sometimes").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn excluded_decision_leaves_confirmed_counts() {
    let app = app(None);
    let (_, before) = get(&app, "/api/report?level=Step&mode=ConfirmedOnly").await;
    let (status, body) = post(&app, &decision("Zamudio-043", "excluded")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["applied"], 1);
    assert_eq!(v["status_counts"]["excluded_non_generator"], 1);
    assert_eq!(v["status_counts"]["pending"], 5);
    assert_eq!(v["status_counts"]["not_required"], 76);

    let (_, after) = get(&app, "/api/report?level=Step&mode=ConfirmedOnly").await;
    assert_eq!(step_count(&before, "DISTRIBUTION_RETAIL"), step_count(&after, "DISTRIBUTION_RETAIL"));
    let (_, pending) = get(&app, "/api/report?level=Step&mode=IncludePending").await;
    assert_eq!(step_count(&pending, "DISTRIBUTION_RETAIL"), 34);
    let (_, dataset) = get(&app, "/api/dataset?mode=include-pending").await;
    let doc = FeatureDocument::parse(&dataset).unwrap();
    assert!(doc.features.iter().all(|f| f.properties["entity_id"] != "Zamudio-043"));

    let (status, body) = post(&app, &decision("Zamudio-043", "confirmed")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["status_counts"]["confirmed_generator"], 1);
    let (_, confirmed) = get(&app, "/api/report?level=Step&mode=ConfirmedOnly").await;
    assert_eq!(step_count(&confirmed, "DISTRIBUTION_RETAIL"), 34);
}

#[tokio::test]
async fn decision_errors() {
    let app = app(None);
    assert_eq!(post(&app, &decision("Zamudio-002", "excluded")).await.0, StatusCode::CONFLICT);
    assert_eq!(post(&app, &decision("Zamudio-999", "excluded")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, &decision("Zamudio-001", "maybe")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, "{\"entity_id\":\"Zamudio-001\"}").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, "not json").await.0, StatusCode::BAD_REQUEST);

    let mixed = r#"[{"entity_id":"Zamudio-001","outcome":"excluded","timestamp":"2024-02-01T09:30:00Z"},
                    {"entity_id":"Zamudio-002","outcome":"excluded","timestamp":"2024-02-01T09:31:00Z"}]"#;
    assert_eq!(post(&app, mixed).await.0, StatusCode::CONFLICT);
    let (_, body) = get(&app, "/api/report?level=Step").await;
    assert_eq!(step_count(&body, "PRODUCTION"), 1, "rejected batch must not apply partially");
}

#[tokio::test]
async fn decisions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("decisions.json");
    {
        let app = app(Some(path.clone()));
        assert_eq!(post(&app, &decision("Zamudio-001", "excluded")).await.0, StatusCode::OK);
        assert_eq!(post(&app, &decision("Zamudio-076", "confirmed")).await.0, StatusCode::OK);
    }
    let stored = flw_scope::scoping::parse_decisions(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(stored.len(), 2);
    assert_eq!(stored[0].timestamp.to_rfc3339(), "2024-02-01T08:30:00+00:00");

    let app = app(Some(path.clone()));
    let (_, body) = get(&app, "/api/report?level=Step").await;
    assert_eq!(step_count(&body, "PRODUCTION"), 0);
    let (_, dataset) = get(&app, "/api/dataset").await;
    let doc = FeatureDocument::parse(&dataset).unwrap();
    let status = doc.features.iter().find(|f| f.properties["entity_id"] == "Zamudio-076").unwrap().properties["status"].clone();
    assert_eq!(status, "confirmed_generator");
    let (_, log) = get(&app, "/api/decisions").await;
    assert_eq!(flw_scope::scoping::parse_decisions(&log).unwrap(), stored);

    assert_eq!(post(&app, &decision("Zamudio-001", "confirmed")).await.0, StatusCode::OK);
    let stored = flw_scope::scoping::parse_decisions(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(stored.len(), 3, "decision log is append-only");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_reads_see_acknowledged_write() {
    let app = app(None);
    let results = spawn_gets(&app, "/api/report?level=class", 16).await;
    assert!(results.iter().all(|(s, _)| *s == StatusCode::OK));
    assert_eq!(post(&app, &decision("Zamudio-001", "excluded")).await.0, StatusCode::OK);
    let after = spawn_gets(&app, "/api/report?level=Step", 8).await;
    assert!(after.iter().all(|(_, b)| step_count(b, "PRODUCTION") == 0));
}

async fn spawn_gets(app: &Router, uri: &'static str, n: usize) -> Vec<(StatusCode, String)> {
    let handles: Vec<_> = (0..n)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { get(&app, uri).await })
        })
        .collect();
    let mut out = Vec::new();
    for h in handles {
        out.push(h.await.unwrap());
    }
    out
}

#[tokio::test]
async fn static_assets() {
    let app = app(None);
    let (status, body) = get(&app, "/").await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains("/api/dataset"));
    assert_eq!(get(&app, "/missing.js").await.0, StatusCode::NOT_FOUND);

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>workbench</p>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let state = ServeState::from_config(&config(None), ReportLevel::Step, Some(dir.path().into())).unwrap();
    let app = router(state);
    let (status, body, ctype) = send(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, "<p>workbench</p>"));
    assert_eq!(ctype.as_deref(), Some("text/html; charset=utf-8"));
    let (_, _, ctype) = send(&app, Request::get("/app.js").body(Body::empty()).unwrap()).await;
    assert_eq!(ctype.as_deref(), Some("text/javascript; charset=utf-8"));
    assert_eq!(get(&app, "/../Cargo.toml").await.0, StatusCode::NOT_FOUND);
}
