mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use literacy_core::disclosure::REFLECTION_CUE;
use literacy_gateway::router;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn raw(app: &Router, uri: &str) -> (StatusCode, String, String) {
    let resp = app
        .clone()
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, ctype, String::from_utf8(bytes.to_vec()).unwrap())
}

#[tokio::test]
async fn chat_forwarded_shape() {
    let h = common::harness();
    let app = router(h.gateway.clone());
    let (status, v) = call(
        &app,
        "POST",
        "/v1/chat",
        Some(json!({"session_id": "s", "text": "I felt anxious today."})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["outcome"], "forwarded");
    assert_eq!(v["assistant_text"], "echo: I felt anxious today.");
    assert!(v["interventions"].is_array());
    assert_eq!(v["clarity"]["score"], 4);
    assert!(v.get("trace").is_none());
}

#[tokio::test]
async fn held_then_decisions_over_http() {
    let h = common::harness();
    let app = router(h.gateway.clone());
    let (status, v) = call(
        &app,
        "POST",
        "/v1/chat",
        Some(json!({"session_id": "s", "text": "My friend Sarah\u{2026}"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["outcome"], "held");
    let card = &v["interventions"][0];
    assert_eq!(card["kind"], "disclosure_reflection");
    assert_eq!(card["message"], REFLECTION_CUE);
    assert_eq!(card["blocking"], true);
    assert_eq!(card["options"][0], json!({"label": "Continue", "action": "continue"}));
    assert_eq!(card["options"][1]["action"], "rephrase_with");
    assert_eq!(card["options"][1]["text"], "My friend [NAME]\u{2026}");
    assert_eq!(card["options"][2]["action"], "free_rephrase");
    assert!(card.get("referral_links").is_none());
    let pending_id = v["pending_id"].as_str().unwrap().to_string();

    let (status, v) = call(
        &app,
        "POST",
        "/v1/chat",
        Some(json!({"session_id": "s", "text": "again"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "session_busy");

    let (status, v) = call(
        &app,
        "POST",
        "/v1/decision",
        Some(json!({"session_id": "s", "pending_id": "wrong", "action": "continue"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "pending_id_mismatch");

    let (status, v) = call(
        &app,
        "POST",
        "/v1/decision",
        Some(json!({"session_id": "s", "pending_id": pending_id, "action": "rephrase",
                    "text": "My friend [NAME]\u{2026}"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["outcome"], "forwarded");
    assert_eq!(h.upstream_texts(), vec!["My friend [NAME]\u{2026}"]);

    let (status, _) = call(
        &app,
        "POST",
        "/v1/decision",
        Some(json!({"session_id": "s", "pending_id": pending_id, "action": "continue"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, m) = call(&app, "GET", "/v1/metrics/s", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(m["rephrase_accepted"], 1);
    assert_eq!(m["proportions"]["safe"], 1.0);
}

#[tokio::test]
async fn crisis_over_http_is_forbidden_to_continue() {
    let h = common::harness();
    let app = router(h.gateway.clone());
    let (_, v) = call(
        &app,
        "POST",
        "/v1/chat",
        Some(json!({"session_id": "s", "text": "I want to kill myself"})),
    )
    .await;
    assert_eq!(v["outcome"], "held");
    assert_eq!(v["interventions"][1]["kind"], "crisis_referral");
    assert_eq!(
        v["interventions"][1]["referral_links"][0],
        json!({"name": "Campus counselling", "url": "https://counselling.example.org"})
    );
    let (status, v) = call(
        &app,
        "POST",
        "/v1/decision",
        Some(json!({"session_id": "s", "pending_id": v["pending_id"], "action": "continue"})),
    )
    .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(v["error"], "continue_forbidden");
    assert!(h.recorder.is_empty());
}

#[tokio::test]
async fn error_statuses() {
    let h = common::harness();
    let app = router(h.gateway.clone());
    let (status, v) = call(
        &app,
        "POST",
        "/v1/chat",
        Some(json!({"session_id": "s", "text": "   "})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "empty_input");

    let (status, v) = call(&app, "POST", "/v1/chat", Some(json!({"session_id": "s"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "invalid_request");

    h.mock.fail_next(500);
    let (status, v) = call(
        &app,
        "POST",
        "/v1/chat",
        Some(json!({"session_id": "s", "text": "I felt anxious today."})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"], "upstream_error");
    assert_eq!(v["status"], 500);
    assert_eq!(v["retriable"], true);

    let (status, v) = call(&app, "GET", "/v1/metrics/nobody", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_session");

    let (status, _) = call(
        &app,
        "POST",
        "/v1/decision",
        Some(json!({"session_id": "s", "pending_id": "x", "action": "continue"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn transparency_page_lists_rendered_templates() {
    let h = common::harness();
    let app = router(h.gateway.clone());
    let (status, v) = call(&app, "GET", "/v1/transparency", None).await;
    assert_eq!(status, StatusCode::OK);
    let entries = v.as_array().unwrap();
    let topics: Vec<_> = entries.iter().map(|e| e["topic"].as_str().unwrap()).collect();
    assert_eq!(
        topics,
        vec!["data_collected", "data_use", "data_not_stored", "system_behavior"]
    );
    for e in entries {
        let m = e["message"].as_str().unwrap();
        assert!(!m.contains('{'), "{m}");
    }
    assert!(entries[1]["message"].as_str().unwrap().contains("127.0.0.1:8081"));
}

#[tokio::test]
async fn ui_is_served() {
    let h = common::harness();
    let app = router(h.gateway.clone());
    let (status, ctype, body) = raw(&app, "/ui/").await;
    assert_eq!(status, StatusCode::OK);
    assert!(ctype.starts_with("text/html"));
    assert!(body.contains("/ui/app.js"));
    let (status, ctype, body) = raw(&app, "/ui/app.js").await;
    assert_eq!(status, StatusCode::OK);
    assert!(ctype.starts_with("text/javascript"));
    for endpoint in ["/v1/chat", "/v1/decision", "/v1/transparency"] {
        assert!(body.contains(endpoint));
    }
    // the client only ever talks to its own origin
    assert!(!body.contains("http://") && !body.contains("https://"));
    let (status, _, _) = raw(&app, "/ui/style.css").await;
    assert_eq!(status, StatusCode::OK);
    let (status, _, _) = raw(&app, "/").await;
    assert_eq!(status, StatusCode::TEMPORARY_REDIRECT);
}
