mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use coach_core::gateway::UnavailableGateway;
use coach_core::agent::AgentVoice;
use coach_service::{router, ServiceConfig};
use common::*;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn app(path: &std::path::Path) -> Router {
    router(Arc::new(coach(path)))
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn session_view_hides_agent_internals() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("s.redb"));
    let (status, body) =
        call(&app, Method::POST, "/sessions", Some(json!({"scenario_id": "used-car", "condition": "ACE", "seed": 4}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["phase"], "AwaitingPrep");
    for hidden in ["agent_state", "feedback", "seed", "prep_labels"] {
        assert!(body.get(hidden).is_none(), "{hidden}");
    }
    assert!(body["scenario"].get("counterpart_reservation").is_none());
    assert!(body["scenario"].get("agent_prompt_template").is_none());

    let (status, scenarios) = call(&app, Method::GET, "/scenarios", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(scenarios.as_array().unwrap().len(), 2);
    assert!(scenarios[0].get("counterpart_reservation").is_none());
    let (status, health) = call(&app, Method::GET, "/healthz", None).await;
    assert_eq!((status, health), (StatusCode::OK, json!({"status": "ok"})));
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("s.redb"));
    let (status, body) =
        call(&app, Method::POST, "/sessions", Some(json!({"scenario_id": "boat", "condition": "ACE"}))).await;
    assert_eq!((status, error_code(&body)), (StatusCode::NOT_FOUND, "UNKNOWN_SCENARIO"));
    assert!(body["error"]["message"].as_str().unwrap().contains("boat"));

    let (status, body) = call(&app, Method::GET, "/sessions/missing", None).await;
    assert_eq!((status, error_code(&body)), (StatusCode::NOT_FOUND, "NOT_FOUND"));

    let (_, s) =
        call(&app, Method::POST, "/sessions", Some(json!({"scenario_id": "used-car", "condition": "NoFeedback"}))).await;
    let id = s["id"].as_str().unwrap();
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({"text": "hi"}))).await;
    assert_eq!((status, error_code(&body)), (StatusCode::CONFLICT, "WRONG_PHASE"));
    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/feedback"), None).await;
    assert_eq!((status, error_code(&body)), (StatusCode::CONFLICT, "WRONG_PHASE"));

    let prep = json!({"walk_away": 13500, "target": 12500, "planned_opening": 11000});
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/preparation"), Some(prep)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["phase"], "Negotiating");
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({"text": ""}))).await;
    assert_eq!((status, error_code(&body)), (StatusCode::BAD_REQUEST, "INVALID_INPUT"));
}

#[tokio::test]
async fn short_reflection_is_unprocessable() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("s.redb"));
    let (_, s) =
        call(&app, Method::POST, "/sessions", Some(json!({"scenario_id": "used-car", "condition": "ACE", "seed": 1}))).await;
    let id = s["id"].as_str().unwrap().to_owned();
    call(&app, Method::POST, &format!("/sessions/{id}/preparation"), Some(serde_json::to_value(car_prep()).unwrap())).await;
    let mut deal = Value::Null;
    for line in CAR_LINES {
        let (status, r) = call(&app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({"text": line}))).await;
        assert_eq!(status, StatusCode::OK);
        deal = r["deal"].clone();
        if !deal.is_null() {
            assert_eq!(r["phase"], "FeedbackReady");
            break;
        }
    }
    assert_eq!(deal, json!(12000));
    let (status, fb) = call(&app, Method::GET, &format!("/sessions/{id}/feedback"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(fb["holistic"].as_str().unwrap().contains("I could do $11,400"));
    let (status, body) =
        call(&app, Method::POST, &format!("/sessions/{id}/reflection"), Some(json!({"answers": ["ok", "ok", "ok", "ok"]})))
            .await;
    assert_eq!((status, error_code(&body)), (StatusCode::UNPROCESSABLE_ENTITY, "TOO_SHORT_ANSWER"));
    let (status, body) =
        call(&app, Method::POST, &format!("/sessions/{id}/reflection"), Some(json!({"answers": answers(4)}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["phase"], "Done");
    let (status, second) = call(&app, Method::POST, &format!("/sessions/{id}/second-trial"), None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(second["scenario"]["id"], "summer-sublease");
    assert_eq!(second["previous_session"], json!(id));
    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/survey"), Some(json!({"rating": 5}))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn gateway_outage_is_503() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig { agent_voice: AgentVoice::Gateway, ..config(&dir.path().join("s.redb")) };
    let app = router(Arc::new(coach_with(cfg, Arc::new(UnavailableGateway))));
    let (_, s) =
        call(&app, Method::POST, "/sessions", Some(json!({"scenario_id": "used-car", "condition": "ACE", "seed": 1}))).await;
    let id = s["id"].as_str().unwrap();
    call(&app, Method::POST, &format!("/sessions/{id}/preparation"), Some(serde_json::to_value(car_prep()).unwrap())).await;
    let (status, body) =
        call(&app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({"text": "How about $11,000?"}))).await;
    assert_eq!((status, error_code(&body)), (StatusCode::SERVICE_UNAVAILABLE, "GATEWAY_UNAVAILABLE"));
}

#[tokio::test]
async fn assignments_rotate_through_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("s.redb"));
    let mut seen = Vec::new();
    for _ in 0..3 {
        let (status, body) = call(&app, Method::POST, "/assignments", None).await;
        assert_eq!(status, StatusCode::OK);
        seen.push(body["condition"].as_str().unwrap().to_owned());
    }
    seen.sort();
    assert_eq!(seen, ["ACE", "NoFeedback", "OtherFeedback"]);
}
