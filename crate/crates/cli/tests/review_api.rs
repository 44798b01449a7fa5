use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use groundsynth::dataset::{ReviewTask, TaskStatus};
use groundsynth::review::{create_build, ReviewStore};
use groundsynth::{BoundingBox, ElementType, Platform, ScreenDims};
use groundsynth_cli::serve::router;

fn build(n: usize) -> (tempfile::TempDir, Router) {
    let tmp = tempfile::tempdir().unwrap();
    let shot = tmp.path().join("shot.png");
    groundsynth::som::RgbImage::new(200, 100).save(&shot).unwrap();
    let tasks: Vec<ReviewTask> = (0..n)
        .map(|i| ReviewTask {
            task_id: format!("t{i:05}"),
            screenshot_path: shot.to_string_lossy().into_owned(),
            bbox: BoundingBox::new(10, 10, 50, 30).unwrap(),
            instruction: format!("open item {i}"),
            element_type: ElementType::Text,
            platform: Platform::Web,
            status: TaskStatus::Pending,
            screen: ScreenDims::new(200, 100).unwrap(),
        })
        .collect();
    let dir = tmp.path().join("build");
    create_build(&dir, &tasks).unwrap();
    let store = ReviewStore::open(&dir).unwrap();
    (tmp, router(Arc::new(store)))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value, bytes)
}

fn valid(id: &str) -> Value {
    json!({
        "task_id": id,
        "box_quality": "valid",
        "instruction_quality": "valid",
        "instruction_kind": "explicit",
        "reviewer_tag": "r1"
    })
}

#[tokio::test]
async fn fresh_build_progress() {
    let (_tmp, app) = build(10);
    let (status, body, _) = call(&app, Method::GET, "/progress", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"pending": 10, "done": 0, "total": 10}));
}

#[tokio::test]
async fn valid_verdict_marks_task_done() {
    let (_tmp, app) = build(3);
    let (status, body, _) = call(&app, Method::POST, "/tasks/t00001/verdict", Some(valid("t00001"))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["task"]["status"], "done");
    assert_eq!(body["verdict"]["box_quality"], "valid");

    let (_, progress, _) = call(&app, Method::GET, "/progress", None).await;
    assert_eq!(progress["done"], 1);
    let (_, page, _) = call(&app, Method::GET, "/tasks?status=pending", None).await;
    let ids: Vec<_> = page["tasks"].as_array().unwrap().iter().map(|t| t["task_id"].clone()).collect();
    assert_eq!(ids, [json!("t00000"), json!("t00002")]);
}

#[tokio::test]
async fn resubmission_replaces_verdict() {
    let (tmp, app) = build(2);
    call(&app, Method::POST, "/tasks/t00000/verdict", Some(valid("t00000"))).await;
    call(&app, Method::POST, "/tasks/t00000/verdict", Some(valid("t00000"))).await;
    let mut serious = valid("t00000");
    serious["box_quality"] = json!("serious");
    let (status, body, _) = call(&app, Method::POST, "/tasks/t00000/verdict", Some(serious)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["verdict"]["box_quality"], "serious");
    let (_, progress, _) = call(&app, Method::GET, "/progress", None).await;
    assert_eq!(progress["done"], 1);

    // the identical resubmit did not grow the log
    let log = std::fs::read_to_string(tmp.path().join("build/verdicts.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    drop(app);
    let reopened = ReviewStore::open(tmp.path().join("build")).unwrap();
    assert_eq!(reopened.verdicts().len(), 1);
}

#[tokio::test]
async fn slight_without_correction_is_rejected() {
    let (_tmp, app) = build(1);
    let mut v = valid("t00000");
    v["instruction_quality"] = json!("slight");
    let (status, body, _) = call(&app, Method::POST, "/tasks/t00000/verdict", Some(v)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["errors"][0]["field"], "corrected_instruction");

    let mut v = valid("t00000");
    v["box_quality"] = json!("slight");
    v["corrected_bbox"] = json!({"x1": 0, "y1": 0, "x2": 500, "y2": 20});
    let (status, body, _) = call(&app, Method::POST, "/tasks/t00000/verdict", Some(v)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["errors"][0]["field"], "corrected_bbox");

    let (status, body, _) = call(&app, Method::POST, "/tasks/t00000/verdict", Some(json!({"task_id": 3}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["errors"][0]["field"], "body");

    let (_, progress, _) = call(&app, Method::GET, "/progress", None).await;
    assert_eq!(progress["done"], 0);
}

#[tokio::test]
async fn unknown_task_is_404() {
    let (_tmp, app) = build(1);
    let (status, _, _) = call(&app, Method::GET, "/tasks/t99999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = call(&app, Method::POST, "/tasks/t99999/verdict", Some(valid("t99999"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn task_view_links_a_servable_screenshot() {
    let (_tmp, app) = build(1);
    let (status, body, _) = call(&app, Method::GET, "/tasks/t00000", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["verdict"].is_null());
    let url = body["screenshot_url"].as_str().unwrap().to_string();
    let (status, _, bytes) = call(&app, Method::GET, &url, None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(bytes.starts_with(b"\x89PNG"));

    let (status, _, _) = call(&app, Method::GET, "/screenshots/..%2Ftasks.jsonl", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn paging() {
    let (_tmp, app) = build(7);
    let (_, page, _) = call(&app, Method::GET, "/tasks?offset=2&limit=3", None).await;
    let ids: Vec<_> = page["tasks"].as_array().unwrap().iter().map(|t| t["task_id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids, ["t00002", "t00003", "t00004"]);
    let (_, page, _) = call(&app, Method::GET, "/tasks", None).await;
    assert_eq!(page["limit"], 50);
    assert_eq!(page["tasks"].as_array().unwrap().len(), 7);
}
