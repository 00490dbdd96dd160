use std::sync::Arc;

use aiopt_core::fixtures::spike_stream;
use aiopt_core::reporting::{import_report, CSV_SECTIONS};
use aiopt_core::{AppConfig, QTable};
use aiopt_service::{router, Session, Store, DEFAULT_MAX_BODY_BYTES};
use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn store_with(session: Session, limit: usize) -> Arc<Store> {
    Arc::new(Store::new(AppConfig::default(), limit, session))
}

fn fresh() -> Arc<Store> {
    store_with(Session::default(), DEFAULT_MAX_BODY_BYTES)
}

struct Reply {
    status: StatusCode,
    content_type: String,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        let text = String::from_utf8(self.body.clone()).unwrap();
        assert!(!text.contains("NaN") && !text.contains("Infinity"), "{text}");
        let value: Value = serde_json::from_str(&text).unwrap();
        assert_finite(&value);
        value
    }
}

fn assert_finite(v: &Value) {
    match v {
        Value::Number(n) => assert!(n.as_f64().is_some_and(f64::is_finite)),
        Value::Array(items) => items.iter().for_each(assert_finite),
        Value::Object(map) => map.values().for_each(assert_finite),
        _ => {}
    }
}

async fn call(store: &Arc<Store>, method: Method, uri: &str, body: impl Into<Body>) -> Reply {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.into())
        .unwrap();
    let response = router(Arc::clone(store)).oneshot(request).await.unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|h| h.to_str().unwrap().to_string())
        .unwrap_or_default();
    let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, body }
}

async fn get(store: &Arc<Store>, uri: &str) -> Reply {
    call(store, Method::GET, uri, Body::empty()).await
}

async fn post(store: &Arc<Store>, uri: &str, body: Value) -> Reply {
    call(store, Method::POST, uri, body.to_string()).await
}

async fn revision(store: &Arc<Store>) -> u64 {
    get(store, "/api/v1/state").await.json()["revision"].as_u64().unwrap()
}

fn telemetry(ticks: usize) -> Value {
    serde_json::to_value(spike_stream(5, ticks, 1, 100, 10.0).samples).unwrap()
}

async fn ingested_and_trained() -> Arc<Store> {
    let store = fresh();
    assert_eq!(post(&store, "/api/v1/metrics", telemetry(180)).await.status, StatusCode::OK);
    let r = post(&store, "/api/v1/train", json!({"episodes": 20, "seed": 3})).await;
    assert_eq!(r.status, StatusCode::OK);
    store
}

#[tokio::test]
async fn ingest_accepts_partially() {
    let store = fresh();
    let body = json!([
        {"ts": 1, "source": "web", "metric": "latency_ms", "value": 12.5, "unit": "ms"},
        {"ts": 2, "source": "web", "metric": "cpu_util", "value": 0.4, "unit": "fraction"},
        {"ts": 3, "source": "web", "metric": "latency_ms", "value": -1.0, "unit": "ms"}
    ]);
    let r = post(&store, "/api/v1/metrics", body).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["ingested"], 2);
    assert_eq!(v["rejected"], 1);
    assert_eq!(v["reasons"][0]["index"], 2);

    let r = post(&store, "/api/v1/metrics", json!([])).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!((r.json()["ingested"].clone(), r.json()["rejected"].clone()), (json!(0), json!(0)));
    assert_eq!(revision(&store).await, 2);
}

#[tokio::test]
async fn ingest_rejects_bad_bodies() {
    let store = fresh();
    assert_eq!(call(&store, Method::POST, "/api/v1/metrics", "not json").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(post(&store, "/api/v1/metrics", json!({"ts": 1})).await.status, StatusCode::BAD_REQUEST);
    let small = store_with(Session::default(), 64);
    let r = post(&small, "/api/v1/metrics", telemetry(3)).await;
    assert_eq!(r.status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(revision(&store).await, 0);
    assert_eq!(revision(&small).await, 0);
}

#[tokio::test]
async fn training_overrides_and_validation() {
    let store = fresh();
    let r = post(&store, "/api/v1/train", json!({"episodes": 1})).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["episodes"], 1);
    assert_eq!(v["last_episode"]["steps"], 48);
    assert_eq!(revision(&store).await, 1);

    assert_eq!(post(&store, "/api/v1/train", json!({"episodes": 0})).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post(&store, "/api/v1/train", json!({"episodes": "x"})).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(revision(&store).await, 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_training_is_refused() {
    let store = fresh();
    let first = {
        let store = Arc::clone(&store);
        tokio::spawn(async move { post(&store, "/api/v1/train", json!({"episodes": 20000})).await.status })
    };
    while !store.is_training() {
        tokio::task::yield_now().await;
    }
    let second = post(&store, "/api/v1/train", json!({"episodes": 1})).await;
    assert_eq!(second.status, StatusCode::CONFLICT);
    assert_eq!(second.json()["error"], "training_in_progress");
    // The table is not observable before the job commits.
    assert_eq!(get(&store, "/api/v1/state").await.json()["trained"], false);
    assert_eq!(first.await.unwrap(), StatusCode::OK);
    assert_eq!(revision(&store).await, 1);
    assert!(!store.is_training());
}

#[tokio::test]
async fn recommendation_guards() {
    let store = fresh();
    let r = get(&store, "/api/v1/recommendations?top=3").await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"], "not_trained");

    post(&store, "/api/v1/train", json!({"episodes": 1})).await;
    let r = get(&store, "/api/v1/recommendations?top=3").await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"], "no_data");

    for bad in ["9", "0", "abc"] {
        let r = get(&store, &format!("/api/v1/recommendations?top={bad}")).await;
        assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "top={bad}");
    }
}

#[tokio::test]
async fn recommendations_are_ranked_and_leave_revision_alone() {
    let store = ingested_and_trained().await;
    let before = revision(&store).await;
    let r = get(&store, "/api/v1/recommendations?top=3").await;
    assert_eq!(r.status, StatusCode::OK);
    let recs = r.json()["recommendations"].as_array().unwrap().clone();
    assert_eq!(recs.len(), 3);
    let ranks: Vec<u64> = recs.iter().map(|r| r["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, [1, 2, 3]);
    let q: Vec<f64> = recs.iter().map(|r| r["q_value"].as_f64().unwrap()).collect();
    assert!(q.windows(2).all(|w| w[0] >= w[1]));
    for uri in ["/api/v1/flaws", "/api/v1/kpis", "/api/v1/report", "/api/v1/report?format=csv", "/api/v1/state"] {
        assert_eq!(get(&store, uri).await.status, StatusCode::OK, "{uri}");
    }
    assert_eq!(revision(&store).await, before);
}

fn zero_table_store() -> Arc<Store> {
    let session = Session {
        table: Some(QTable::new()),
        ..Session::default()
    };
    store_with(session, DEFAULT_MAX_BODY_BYTES)
}

async fn issue_one(store: &Arc<Store>) -> String {
    post(store, "/api/v1/metrics", telemetry(60)).await;
    let r = get(store, "/api/v1/recommendations?top=1").await;
    assert_eq!(r.status, StatusCode::OK);
    r.json()["recommendations"][0]["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn feedback_contract() {
    let store = zero_table_store();
    let id = issue_one(&store).await;
    let uri = format!("/api/v1/recommendations/{id}/feedback");

    assert_eq!(post(&store, &uri, json!({"decision": "maybe"})).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = post(&store, &uri, json!({"decision": "reject"})).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!((r.json()["new_q_value"].as_f64().unwrap() + 0.05).abs() < 1e-12);
    assert_eq!(post(&store, &uri, json!({"decision": "accept"})).await.status, StatusCode::CONFLICT);
    let unknown = post(&store, "/api/v1/recommendations/nope/feedback", json!({"decision": "accept"})).await;
    assert_eq!(unknown.status, StatusCode::NOT_FOUND);
    // ingest + one committed feedback
    assert_eq!(revision(&store).await, 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn duplicate_feedback_resolves_exactly_once() {
    let store = zero_table_store();
    let id = issue_one(&store).await;
    let before = revision(&store).await;
    let uri = format!("/api/v1/recommendations/{id}/feedback");
    let tasks: Vec<_> = (0..16)
        .map(|i| {
            let store = Arc::clone(&store);
            let uri = uri.clone();
            let decision = if i % 2 == 0 { "accept" } else { "reject" };
            tokio::spawn(async move { post(&store, &uri, json!({ "decision": decision })).await.status })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1);
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 15);
    assert_eq!(revision(&store).await, before + 1);
}

#[tokio::test]
async fn simulate_contract() {
    let store = fresh();
    let before = revision(&store).await;
    let r = post(&store, "/api/v1/simulate", json!({"action": "no_op"})).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["predicted_savings"], 0.0);
    assert_eq!(v["roi"], 0.0);
    assert_eq!(v["trajectory"].as_array().unwrap().len(), 12);

    let v = post(&store, "/api/v1/simulate", json!({"action": "optimize_code", "horizon": 3})).await.json();
    assert_eq!(v["effort_cost"], 50.0);
    assert_eq!(v["trajectory"].as_array().unwrap().len(), 3);

    for body in [json!({"action": "no_op", "horizon": 0}), json!({"action": "teleport"}), json!({})] {
        assert_eq!(post(&store, "/api/v1/simulate", body).await.status, StatusCode::UNPROCESSABLE_ENTITY);
    }
    assert_eq!(revision(&store).await, before);
}

#[tokio::test]
async fn empty_documents_and_formats() {
    let store = fresh();
    let r = get(&store, "/api/v1/kpis").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["empty"], true);
    assert_eq!(r.json()["kpis"], Value::Null);
    assert_eq!(get(&store, "/api/v1/flaws").await.json()["flaws"], json!([]));
    assert_eq!(get(&store, "/api/v1/state").await.json()["snapshot"], Value::Null);
    assert_eq!(get(&store, "/api/v1/report?format=xml").await.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = get(&store, "/api/v1/report?format=json").await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(import_report(&r.body).unwrap().kpis.is_none());
}

#[tokio::test]
async fn csv_report_is_sectioned() {
    let store = ingested_and_trained().await;
    get(&store, "/api/v1/recommendations?top=2").await;
    let r = get(&store, "/api/v1/report?format=csv").await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(r.content_type.starts_with("text/csv"));
    let text = String::from_utf8(r.body).unwrap();
    for section in CSV_SECTIONS {
        assert!(text.contains(section), "{section}");
    }
    let json = get(&store, "/api/v1/report").await;
    let report = import_report(&json.body).unwrap();
    assert_eq!(report.recommendations.len(), 2);
    // 180 s of ticks straddle four epoch-aligned 60 s windows.
    assert_eq!(report.cost_breakdown_series.len(), 4);
    assert!(report.kpis.is_some());
    let flaws = get(&store, "/api/v1/flaws").await.json();
    assert_eq!(flaws["flaws"].as_array().unwrap().len(), report.flaws.len());
}

#[tokio::test]
async fn snapshots_restore_sessions() {
    let store = ingested_and_trained().await;
    let snapshot = store.snapshot().await;
    let restored = store_with(snapshot.clone().restore().unwrap(), DEFAULT_MAX_BODY_BYTES);
    assert_eq!(revision(&restored).await, revision(&store).await);
    assert_eq!(
        get(&restored, "/api/v1/state").await.json(),
        get(&store, "/api/v1/state").await.json()
    );
    let text = serde_json::to_string(&snapshot).unwrap();
    assert!(serde_json::from_str::<aiopt_service::SessionSnapshot>(&text).is_ok());
}
