//! HTTP/JSON API over one review build directory.
//!
//! - `GET  /tasks?status=pending&offset=0&limit=50`
//! - `GET  /tasks/{id}`
//! - `GET  /screenshots/{file}`
//! - `POST /tasks/{id}/verdict`
//! - `GET  /progress`

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use groundsynth::dataset::{FieldError, ReviewTask, ReviewVerdict, TaskStatus};
use groundsynth::review::{Progress, ReviewStore, SubmitError};

const DEFAULT_PAGE: usize = 50;
const MAX_PAGE: usize = 500;

type Shared = Arc<ReviewStore>;

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/tasks", get(list_tasks))
        .route("/tasks/{id}", get(get_task))
        .route("/tasks/{id}/verdict", post(post_verdict))
        .route("/screenshots/{file}", get(get_screenshot))
        .route("/progress", get(progress))
        .with_state(store)
}

pub async fn serve(store: ReviewStore, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, build = %store.dir().display(), "review service listening");
    axum::serve(listener, router(Arc::new(store))).await?;
    Ok(())
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    status: Option<TaskStatus>,
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskPage {
    pub tasks: Vec<ReviewTask>,
    pub offset: usize,
    pub limit: usize,
}

async fn list_tasks(State(store): State<Shared>, Query(q): Query<ListQuery>) -> Json<TaskPage> {
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    Json(TaskPage {
        tasks: store.list(q.status, q.offset, limit),
        offset: q.offset,
        limit,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskView {
    pub task: ReviewTask,
    pub verdict: Option<ReviewVerdict>,
    pub screenshot_url: String,
}

async fn get_task(State(store): State<Shared>, Path(id): Path<String>) -> Response {
    match store.task(&id) {
        Some((task, verdict)) => Json(TaskView {
            screenshot_url: format!("/screenshots/{}", task.screenshot_path),
            task,
            verdict,
        })
        .into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown task {id}")),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FieldErrors {
    pub errors: Vec<FieldError>,
}

async fn post_verdict(
    State(store): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<ReviewVerdict>, JsonRejection>,
) -> Response {
    if store.task(&id).is_none() {
        return error(StatusCode::NOT_FOUND, format!("unknown task {id}"));
    }
    let verdict = match body {
        Ok(Json(v)) => v,
        Err(rejection) => {
            let errors = vec![FieldError {
                field: "body".into(),
                message: rejection.body_text(),
            }];
            return (StatusCode::UNPROCESSABLE_ENTITY, Json(FieldErrors { errors })).into_response();
        }
    };
    // the fsync happens inside submit; answer only once it is durable
    let task_id = id.clone();
    let result = {
        let store = store.clone();
        tokio::task::spawn_blocking(move || store.submit(&task_id, &verdict)).await
    };
    match result {
        Ok(Ok(())) => {
            let (task, verdict) = store.task(&id).expect("task exists");
            Json(TaskView {
                screenshot_url: format!("/screenshots/{}", task.screenshot_path),
                task,
                verdict,
            })
            .into_response()
        }
        Ok(Err(SubmitError::UnknownTask(id))) => error(StatusCode::NOT_FOUND, format!("unknown task {id}")),
        Ok(Err(SubmitError::Invalid(errors))) => {
            (StatusCode::UNPROCESSABLE_ENTITY, Json(FieldErrors { errors })).into_response()
        }
        Ok(Err(SubmitError::Store(e))) => {
            tracing::error!("verdict write failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "failed to persist verdict")
        }
        Err(e) => {
            tracing::error!("verdict task panicked: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "failed to persist verdict")
        }
    }
}

async fn get_screenshot(State(store): State<Shared>, Path(file): Path<String>) -> Response {
    if file.is_empty() || file.starts_with('.') || file.contains(['/', '\\']) {
        return error(StatusCode::NOT_FOUND, "no such screenshot");
    }
    let path = store.screenshot_dir().join(&file);
    match tokio::fs::read(&path).await {
        Ok(bytes) => {
            let mime = match path.extension().and_then(|e| e.to_str()) {
                Some("jpg" | "jpeg") => "image/jpeg",
                Some("webp") => "image/webp",
                _ => "image/png",
            };
            ([(header::CONTENT_TYPE, mime)], bytes).into_response()
        }
        Err(_) => error(StatusCode::NOT_FOUND, "no such screenshot"),
    }
}

async fn progress(State(store): State<Shared>) -> Json<Progress> {
    Json(store.progress())
}
