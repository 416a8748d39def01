use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use semschema_cli::{router, AppState, Snapshot};
use semschema_core::json::{parse_json, JsonValue};
use tower::ServiceExt;

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/repo")
}

fn state(read_only: bool) -> Arc<AppState> {
    AppState::new(Snapshot::load(&repo()).unwrap(), repo(), read_only)
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

#[tokio::test]
async fn schemas_are_served_byte_for_byte() {
    let s = state(true);
    let on_disk = std::fs::read_to_string(repo().join("event/view-item/0.json")).unwrap();
    let (status, body) = call(&s, "GET", "/schemas/event/view-item/0", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, on_disk);
    let latest = std::fs::read_to_string(repo().join("event/view-item/2.json")).unwrap();
    assert_eq!(call(&s, "GET", "/schemas/event/view-item/latest", "").await.1, latest);
    for missing in [
        "/schemas/event/view-item/3",
        "/schemas/event/view-item/01",
        "/schemas/object/view-item/0",
        "/schemas/event/nope/0",
    ] {
        assert_eq!(call(&s, "GET", missing, "").await.0, StatusCode::NOT_FOUND, "{missing}");
    }
}

#[tokio::test]
async fn every_id_resolves_to_its_document() {
    let s = state(true);
    let snap = s.snapshot();
    for title in snap.registry.titles() {
        for doc in snap.registry.history(title).unwrap() {
            let url = doc.id.to_string();
            let path = url.trim_start_matches("https://schemas.example.org");
            let (status, body) = call(&s, "GET", path, "").await;
            assert_eq!(status, StatusCode::OK, "{url}");
            assert_eq!(body, doc.raw());
        }
    }
}

#[tokio::test]
async fn validate_endpoint() {
    let s = state(true);
    let example = std::fs::read_to_string(repo().join("../events/view-item.json")).unwrap();
    let (status, body) = call(&s, "POST", "/validate", &format!(r#"{{"event": {example}}}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse_json(&body).unwrap(), parse_json(r#"{"valid": true, "mismatches": []}"#).unwrap());

    let body = r#"{"event": {"@type": "View"}, "target": {"title": "View Item", "version": 0}}"#;
    let (status, resp) = call(&s, "POST", "/validate", body).await;
    assert_eq!(status, StatusCode::OK);
    let v = parse_json(&resp).unwrap();
    assert_eq!(v.get("valid"), Some(&JsonValue::Bool(false)));
    assert!(!v.get("mismatches").unwrap().as_array().unwrap().is_empty());

    assert_eq!(call(&s, "POST", "/validate", "{nope").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&s, "POST", "/validate", "{}").await.0, StatusCode::BAD_REQUEST);
    let unknown = r#"{"event": {}, "target": {"title": "Nope"}}"#;
    assert_eq!(call(&s, "POST", "/validate", unknown).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn transform_endpoint() {
    let s = state(true);
    let mixed = std::fs::read_to_string(repo().join("../events/mixed-versions.ndjson")).unwrap();
    let first = mixed.lines().next().unwrap();
    let (status, body) = call(&s, "POST", "/transform", first).await;
    assert_eq!(status, StatusCode::OK);
    let out = parse_json(&body).unwrap();
    assert_eq!(
        out.get("schema").and_then(JsonValue::as_str),
        Some("https://schemas.example.org/schemas/event/view-item/2")
    );
    assert_eq!(call(&s, "POST", "/transform", r#"{"a": 1}"#).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn health_and_reload() {
    let ro = state(true);
    let (status, body) = call(&ro, "GET", "/health", "").await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains("\"schemas\":12"));
    assert_eq!(call(&ro, "POST", "/reload", "").await.0, StatusCode::CONFLICT);
    let rw = state(false);
    assert_eq!(call(&rw, "POST", "/reload", "").await.0, StatusCode::OK);
}

#[tokio::test]
async fn identical_requests_get_identical_responses() {
    let s = state(true);
    let body = r#"{"event": {"schema": "x"}}"#;
    let a = call(&s, "POST", "/validate", body).await;
    let b = call(&s, "POST", "/validate", body).await;
    assert_eq!(a, b);
}
