//! The HTTP contract, exercised in-process.

use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use sentinel_core::{KnowledgeBase, Lexicon};
use sentinel_service::api::{router_with, SharedEngine};
use sentinel_service::{Engine, EngineConfig, Journal};
use serde_json::{json, Value};
use tower::ServiceExt;

const TABLE2: &[u8] = include_bytes!("../../core/data/table2.json");
const FIG2: &str =
    "A typical day at the office. Lots of complaints and bad mood. Cannot wait for the day to be over...!";

fn engine(kb: KnowledgeBase) -> SharedEngine {
    let engine = Engine::new(
        EngineConfig::default(),
        Arc::new(Lexicon::bundled()),
        kb,
        Journal::Memory(Vec::new()),
    )
    .unwrap();
    Arc::new(RwLock::new(engine))
}

fn table2() -> SharedEngine {
    engine(KnowledgeBase::load_snapshot(TABLE2).unwrap())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn compose(app: &Router, text: &str) -> (StatusCode, Value) {
    call(
        app,
        Method::POST,
        "/api/v1/posts",
        Some(json!({"user_id": "alice", "text": text, "declared_audience": "public"})),
    )
    .await
}

#[tokio::test]
async fn office_post_is_held_with_the_job_loss_warning() {
    let app = router_with(table2());
    let (status, body) = compose(&app, FIG2).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        json!({
            "post_id": "post-000001",
            "status": "pending",
            "warning": {
                "post_id": "post-000001",
                "items": [{"uin": "Job loss", "audience": "Work colleagues", "severity": 0.904}]
            }
        })
    );
}

#[tokio::test]
async fn harmless_post_is_published_at_once() {
    let app = router_with(table2());
    let (status, body) = compose(&app, "Nice weather today").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "published");
    assert_eq!(body["warning"]["items"], json!([]));
}

#[tokio::test]
async fn malformed_or_unknown_inputs_are_rejected() {
    let app = router_with(table2());
    let (status, _) = call(
        &app,
        Method::POST,
        "/api/v1/posts",
        Some(json!({"user_id": "alice", "declared_audience": "public"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(
        &app,
        Method::POST,
        "/api/v1/posts",
        Some(json!({"user_id": "alice", "text": "hi", "declared_audience": "martians"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn decisions_resolve_pending_posts_once() {
    let app = router_with(table2());
    let (_, body) = compose(&app, FIG2).await;
    let id = body["post_id"].as_str().unwrap().to_string();
    let uri = format!("/api/v1/posts/{id}/decision");

    let (status, _) = call(&app, Method::POST, &uri, Some(json!({"action": "shrug"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"action": "publish"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "published", "phi": 0.5}));

    let (status, _) = call(&app, Method::POST, &uri, Some(json!({"action": "retract"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, _) = call(
        &app,
        Method::POST,
        "/api/v1/posts/post-999999/decision",
        Some(json!({"action": "publish"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, body) = compose(&app, FIG2).await;
    let uri = format!(
        "/api/v1/posts/{}/decision",
        body["post_id"].as_str().unwrap()
    );
    let (_, body) = call(&app, Method::POST, &uri, Some(json!({"action": "retract"}))).await;
    assert_eq!(body["status"], "retracted");

    let (status, body) = call(&app, Method::GET, "/api/v1/users/alice/threshold", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["threshold"]["decisions_in_window"], 2);
    let (status, _) = call(&app, Method::GET, "/api/v1/users/bob/threshold", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn full_loop_updates_the_table() {
    let app = router_with(table2());
    let (_, body) = compose(&app, FIG2).await;
    let id = body["post_id"].as_str().unwrap().to_string();

    // a draft cannot be deleted
    let (status, _) = call(&app, Method::DELETE, &format!("/api/v1/posts/{id}"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    call(
        &app,
        Method::POST,
        &format!("/api/v1/posts/{id}/decision"),
        Some(json!({"action": "publish"})),
    )
    .await;
    let (status, body) = call(&app, Method::DELETE, &format!("/api/v1/posts/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["prompt_incident_report"], true);
    assert_eq!(body["detected_sas"].as_array().unwrap().len(), 3);

    // missing details
    let (status, _) = call(
        &app,
        Method::POST,
        "/api/v1/incident-reports",
        Some(json!({"post_id": id, "regretted": true, "uin": "Job loss"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let report = json!({
        "post_id": id,
        "regretted": true,
        "uin": "Job loss",
        "unintended_audience": "Work colleagues",
        "consequence_level": "moderate"
    });
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/v1/incident-reports",
        Some(report.clone()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        json!({"matches": [{"ph_id": "ph-000001", "mode": "exact", "created": false}]})
    );

    let (status, _) = call(&app, Method::POST, "/api/v1/incident-reports", Some(report)).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, table) = call(&app, Method::GET, "/api/v1/contingency-table", None).await;
    let cell = table["cells"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["ph"] == "ph-000001" && c["uin"] == "job loss")
        .unwrap();
    assert_eq!(cell["counts"], json!([50, 48, 11, 0, 0]));
}

#[tokio::test]
async fn unregretted_and_unprompted_reports() {
    let app = router_with(table2());
    let (_, body) = compose(&app, "Nice weather today").await;
    let id = body["post_id"].as_str().unwrap().to_string();
    let (_, body) = call(&app, Method::DELETE, &format!("/api/v1/posts/{id}"), None).await;
    assert_eq!(
        body,
        json!({"prompt_incident_report": false, "detected_sas": []})
    );
    let (status, _) = call(
        &app,
        Method::POST,
        "/api/v1/incident-reports",
        Some(json!({"post_id": id, "regretted": false})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, body) = compose(&app, FIG2).await;
    let id = body["post_id"].as_str().unwrap().to_string();
    call(
        &app,
        Method::POST,
        &format!("/api/v1/posts/{id}/decision"),
        Some(json!({"action": "publish"})),
    )
    .await;
    call(&app, Method::DELETE, &format!("/api/v1/posts/{id}"), None).await;
    let (_, before) = call(&app, Method::GET, "/api/v1/contingency-table", None).await;
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/v1/incident-reports",
        Some(json!({"post_id": id, "regretted": false})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"matches": []}));
    let (_, after) = call(&app, Method::GET, "/api/v1/contingency-table", None).await;
    assert_eq!(before, after);

    let (status, _) = call(
        &app,
        Method::POST,
        "/api/v1/incident-reports",
        Some(json!({"post_id": "post-424242", "regretted": false})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn novel_incident_extends_the_vocabulary() {
    let app = router_with(table2());
    let (_, body) = compose(&app, FIG2).await;
    let id = body["post_id"].as_str().unwrap().to_string();
    call(
        &app,
        Method::POST,
        &format!("/api/v1/posts/{id}/decision"),
        Some(json!({"action": "publish"})),
    )
    .await;
    call(&app, Method::DELETE, &format!("/api/v1/posts/{id}"), None).await;
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/v1/incident-reports",
        Some(json!({
            "post_id": id,
            "regretted": true,
            "uin": "Awkward lunch",
            "unintended_audience": "work colleagues",
            "consequence_level": "minor"
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body["matches"],
        json!([{"ph_id": "ph-000001", "mode": "new-incident", "created": false}])
    );
    let (_, table) = call(&app, Method::GET, "/api/v1/contingency-table", None).await;
    assert!(table["incidents"]
        .as_array()
        .unwrap()
        .iter()
        .any(|i| i["id"] == "awkward lunch" && i["label"] == "Awkward lunch"));
}

#[tokio::test]
async fn risk_index_inspection() {
    let app = router_with(table2());
    let (status, body) = call(
        &app,
        Method::GET,
        "/api/v1/risk-index?ph=ph-000001&uin=job%20loss&alpha=0.05",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let close = |v: &Value, x: f64| (v.as_f64().unwrap() - x).abs() < 5e-4;
    assert!(close(&body["point"], 0.843));
    assert!(close(&body["ci_lower"], 0.782));
    assert!(close(&body["ci_upper"], 0.904));
    assert!(body["variance"].as_f64().unwrap() > 0.0);

    for (uri, expected) in [
        (
            "/api/v1/risk-index?ph=ph-000099&uin=job%20loss",
            StatusCode::NOT_FOUND,
        ),
        (
            "/api/v1/risk-index?ph=ph-000001&uin=boredom",
            StatusCode::NOT_FOUND,
        ),
        (
            "/api/v1/risk-index?ph=ph-000001&uin=job%20loss&alpha=2",
            StatusCode::BAD_REQUEST,
        ),
        (
            "/api/v1/risk-index?ph=ph-000001&uin=job%20loss&alpha=x",
            StatusCode::BAD_REQUEST,
        ),
        ("/api/v1/risk-index?uin=job%20loss", StatusCode::BAD_REQUEST),
        (
            "/api/v1/risk-index?ph=ph-000002&uin=harassment",
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
    ] {
        let (status, _) = call(&app, Method::GET, uri, None).await;
        assert_eq!(status, expected, "{uri}");
    }
}

#[tokio::test]
async fn fresh_server_has_empty_cells() {
    let app = router_with(engine(KnowledgeBase::new()));
    let (status, body) = call(&app, Method::GET, "/api/v1/contingency-table", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["cells"], json!([]));
    let (_, body) = call(&app, Method::GET, "/api/v1/heuristics", None).await;
    assert_eq!(body, json!([]));
}

#[tokio::test]
async fn rejected_requests_leave_no_trace() {
    let shared = table2();
    let app = router_with(shared.clone());
    let (_, body) = compose(&app, FIG2).await;
    let id = body["post_id"].as_str().unwrap().to_string();
    let before = shared.read().unwrap().snapshot_bytes();
    let seq = shared.read().unwrap().last_seq();

    let bad: Vec<(Method, String, Option<Value>)> = vec![
        (
            Method::POST,
            "/api/v1/posts".into(),
            Some(json!({"text": 1})),
        ),
        (
            Method::POST,
            "/api/v1/posts".into(),
            Some(json!({"user_id": "bob", "text": "x", "declared_audience": "nowhere"})),
        ),
        (Method::DELETE, format!("/api/v1/posts/{id}"), None),
        (
            Method::POST,
            "/api/v1/incident-reports".into(),
            Some(json!({"post_id": id, "regretted": false})),
        ),
        (
            Method::POST,
            format!("/api/v1/posts/{id}/decision"),
            Some(json!({"action": 3})),
        ),
    ];
    for (method, uri, body) in bad {
        let (status, _) = call(&app, method, &uri, body).await;
        assert!(status.is_client_error(), "{uri}: {status}");
    }
    assert_eq!(shared.read().unwrap().snapshot_bytes(), before);
    assert_eq!(shared.read().unwrap().last_seq(), seq);
}
