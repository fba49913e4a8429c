use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use cellvault_core::model::{
    canonicalize, snapshot_hash, Cell, CellAddress, CellValue, WorkbookSnapshot,
};
use cellvault_core::store::{CommitMeta, Store};
use cellvault_service::{router, ApiError, DEFAULT_BODY_LIMIT};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    fn error(&self) -> ApiError {
        assert_eq!(self.content_type.as_deref(), Some("application/json"));
        let err: ApiError = serde_json::from_slice(&self.body).unwrap();
        assert_eq!(err.status, self.status.as_u16());
        err
    }
}

async fn send(
    app: &Router,
    method: Method,
    uri: &str,
    body: impl Into<Body>,
    token: Option<&str>,
) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let resp = app
        .clone()
        .oneshot(req.body(body.into()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string());
    let body = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    Reply {
        status,
        content_type,
        body,
    }
}

async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Method::GET, uri, Body::empty(), None).await
}

async fn post(app: &Router, uri: &str, body: impl Into<Body>) -> Reply {
    send(app, Method::POST, uri, body, None).await
}

fn setup() -> (tempfile::TempDir, Store, Router) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::init(dir.path().join("data")).unwrap();
    let app = router(store.clone(), None, DEFAULT_BODY_LIMIT);
    (dir, store, app)
}

fn book(a1: f64) -> Vec<u8> {
    let mut wb = WorkbookSnapshot::new();
    wb.set(
        &CellAddress::from_a1("S", "A1").unwrap(),
        Cell::value(CellValue::number(a1).unwrap()),
    );
    canonicalize(&wb)
}

fn commit_uri(n: usize) -> String {
    format!("/api/v1/workbooks/w1/commits?author=ada&message=save%20{n}&timestamp=2026-03-01T10:00:{n:02}.000Z")
}

#[tokio::test]
async fn first_commit_of_empty_workbook() {
    let (_d, _s, app) = setup();
    let r = post(&app, &commit_uri(0), canonicalize(&WorkbookSnapshot::new())).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let v = r.json();
    assert_eq!(
        v["snapshot_hash"],
        snapshot_hash(&WorkbookSnapshot::new()).as_str()
    );
    assert!(v["firings"].as_array().unwrap().is_empty());
    let summary = &v["diff_summary"];
    assert_eq!(summary["total"], 0);
    assert_eq!(summary["exceptional_count"], 0);
    assert!(summary["by_kind"]
        .as_object()
        .unwrap()
        .values()
        .all(|n| n == 0));
    assert_eq!(v["commit_id"].as_str().unwrap().len(), 64);
}

#[tokio::test]
async fn threshold_rule_fires_step_through_the_api() {
    let (_d, _s, app) = setup();
    for (i, v) in [40.0, 40.0, 40.0].into_iter().enumerate() {
        assert_eq!(
            post(&app, &commit_uri(i), book(v)).await.status,
            StatusCode::CREATED
        );
    }
    let rule =
        r#"{"rule_id":"up50","target":"S!A1","kind":{"type":"threshold_up","threshold":50.0}}"#;
    let r = post(&app, "/api/v1/workbooks/w1/rules?actor=ops", rule).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.json()["rule_id"], "up50");

    let r = post(&app, &commit_uri(3), book(50.0)).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let firings = r.json()["firings"].clone();
    assert_eq!(firings.as_array().unwrap().len(), 1);
    assert_eq!(firings[0]["pattern"], "Step");
    assert_eq!(firings[0]["rule_id"], "up50");

    let stored = get(&app, "/api/v1/workbooks/w1/alerts").await.json();
    assert_eq!(stored, firings);
}

#[tokio::test]
async fn malformed_body_is_format_error() {
    let (_d, _s, app) = setup();
    let r = post(&app, &commit_uri(0), "{\"sheets\":[").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error().code, "FORMAT_ERROR");

    let r = post(&app, "/api/v1/workbooks/w1/commits", book(1.0)).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST, "author is required");
    r.error();
}

#[tokio::test]
async fn oversized_body_is_413() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::init(dir.path()).unwrap();
    let app = router(store, None, 64);
    let r = post(&app, &commit_uri(0), vec![b' '; 65]).await;
    assert_eq!(r.status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(r.error().code, "PAYLOAD_TOO_LARGE");
}

#[tokio::test]
async fn held_writer_lock_is_409() {
    let (_d, store, _) = setup();
    store
        .commit("w1", &WorkbookSnapshot::new(), CommitMeta::new("ada"))
        .unwrap();
    let app = router(
        store.clone().with_lock_timeout(Duration::from_millis(50)),
        None,
        DEFAULT_BODY_LIMIT,
    );
    let holder = std::fs::OpenOptions::new()
        .write(true)
        .open(store.root().join("workbooks/w1/lock"))
        .unwrap();
    holder.lock().unwrap();
    let r = post(&app, &commit_uri(1), book(1.0)).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.error().code, "CONFLICT");
    holder.unlock().unwrap();
    assert_eq!(
        post(&app, &commit_uri(1), book(1.0)).await.status,
        StatusCode::CREATED
    );
}

#[tokio::test]
async fn restore_returns_bytes_and_audits_each_call() {
    let (_d, store, app) = setup();
    post(&app, &commit_uri(0), book(7.0)).await;
    let id = store.resolve("w1", "latest").unwrap().commit_id;
    let body = format!(r#"{{"commit_id":"{id}","actor":"carol"}}"#);
    let a = post(&app, "/api/v1/workbooks/w1/restore", body.clone()).await;
    let b = post(&app, "/api/v1/workbooks/w1/restore", body).await;
    assert_eq!(a.status, StatusCode::OK);
    assert_eq!(a.body, book(7.0));
    assert_eq!(a.body, b.body);

    let audit = get(&app, "/api/v1/workbooks/w1/audit?action=restore")
        .await
        .json();
    assert_eq!(audit.as_array().unwrap().len(), 2);
    assert_eq!(audit[0]["actor"], "carol");

    let r = post(
        &app,
        "/api/v1/workbooks/w1/restore",
        r#"{"commit_id":"ffffffffffff"}"#,
    )
    .await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.error().code, "NOT_FOUND");
}

#[tokio::test]
async fn history_of_never_set_cell_is_all_empty() {
    let (_d, _s, app) = setup();
    for i in 0..3 {
        post(&app, &commit_uri(i), book(i as f64)).await;
    }
    let r = get(&app, "/api/v1/workbooks/w1/cells/S/Z99/history?window=5").await;
    assert_eq!(r.status, StatusCode::OK);
    let points = r.json()["points"].as_array().unwrap().clone();
    assert_eq!(points.len(), 3);
    assert!(points.iter().all(|p| p["value"].is_null()));
}

#[tokio::test]
async fn export_csv_is_byte_stable() {
    let (_d, _s, app) = setup();
    post(&app, &commit_uri(0), book(3.5)).await;
    let uri = "/api/v1/workbooks/w1/export?region=S!A1:B2&format=csv";
    let a = get(&app, uri).await;
    let b = get(&app, uri).await;
    assert_eq!(a.status, StatusCode::OK);
    assert_eq!(a.content_type.as_deref(), Some("text/csv; charset=utf-8"));
    assert_eq!(a.body, b.body);
    assert_eq!(String::from_utf8(a.body).unwrap(), "3.5,\r\n,\r\n");

    let r = get(&app, "/api/v1/workbooks/w1/export?region=A1:::").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error().code, "MALFORMED_REGION");
}

#[tokio::test]
async fn unknown_things_are_404_with_bodies() {
    let (_d, _s, app) = setup();
    assert_eq!(
        get(&app, "/api/v1/workbooks/nope/commits")
            .await
            .error()
            .code,
        "NOT_FOUND"
    );
    assert_eq!(
        get(&app, "/api/v2/anything").await.error().code,
        "NOT_FOUND"
    );
    let r = send(
        &app,
        Method::DELETE,
        "/api/v1/workbooks/w1/commits",
        Body::empty(),
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::METHOD_NOT_ALLOWED);
    r.error();
    let r = get(&app, "/api/v1/workbooks/w1/reports/retirement?window=ten").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    r.error();
}

#[tokio::test]
async fn bearer_token_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::init(dir.path()).unwrap();
    let app = router(store, Some("s3cret".into()), DEFAULT_BODY_LIMIT);
    let r = get(&app, "/api/v1/health").await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    assert_eq!(r.error().code, "UNAUTHORIZED");
    let r = send(
        &app,
        Method::GET,
        "/api/v1/health",
        Body::empty(),
        Some("wrong"),
    )
    .await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    let r = send(
        &app,
        Method::GET,
        "/api/v1/workbooks",
        Body::empty(),
        Some("s3cret"),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, b"[]");
}

#[tokio::test]
async fn watch_and_manifest_round_trip() {
    let (_d, _s, app) = setup();
    post(&app, &commit_uri(0), book(1.0)).await;
    let watch = r#"{"input_regions":["S!A1:A10"]}"#;
    let r = send(&app, Method::PUT, "/api/v1/workbooks/w1/watch", watch, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(
        get(&app, "/api/v1/workbooks/w1/watch").await.json(),
        r.json()
    );

    post(&app, &commit_uri(1), book(2.0)).await;
    let manifest = r#"{"manifest_id":"m1","approver":"lee","created":"2026-03-01T00:00:00.000Z",
        "required":[],"allowed":["S!B1"],"applies_to":"w1"}"#;
    let r = post(&app, "/api/v1/workbooks/w1/manifests", manifest).await;
    assert_eq!(
        r.status,
        StatusCode::CREATED,
        "{}",
        String::from_utf8_lossy(&r.body)
    );
    let dup = post(&app, "/api/v1/workbooks/w1/manifests", manifest).await;
    assert_eq!(dup.error().code, "MANIFEST_INVALID");

    let report = get(&app, "/api/v1/workbooks/w1/compliance?manifest=m1")
        .await
        .json();
    assert_eq!(report["compliant"], false);
    assert_eq!(report["counts"]["violations"], 1);
}
