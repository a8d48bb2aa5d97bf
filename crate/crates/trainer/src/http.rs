//! HTTP API.
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/learners` | `{"display_name"}` |
//! | POST | `/learners/{id}/attempts` | multipart: `audio`, `node_id`, optional `course_id` |
//! | GET | `/learners/{id}/report` | |
//! | GET | `/courses` | |
//! | GET | `/courses/{id}` | |
//! | POST | `/courses` | custom course request |
//! | POST | `/learners/{id}/courses/{cid}/advance` | `{"node_id", "choice"}` |
//! | GET | `/artifacts/{id}` | |
//!
//! Every JSON response carries `format_version`. Errors are
//! `{"format_version", "stage", "code", "message"}`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pronunciation_core::phoneme::FORMAT_VERSION;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ServiceConfig;
use crate::service::{CustomCourseRequest, ErrorCode, ServiceError, Stage, TrainerService};

pub const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;

fn status_of(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::UnknownLearner
        | ErrorCode::UnknownCourse
        | ErrorCode::UnknownNode
        | ErrorCode::UnknownArtifact => StatusCode::NOT_FOUND,
        ErrorCode::AmbiguousNode
        | ErrorCode::UnknownChoice
        | ErrorCode::UnknownPhoneme
        | ErrorCode::BadAudio
        | ErrorCode::ValidationError => StatusCode::BAD_REQUEST,
        ErrorCode::PipelineError => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCode::StorageError => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(self.0.code);
        (status, Json(versioned(&self.0))).into_response()
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(ServiceError::new(
        Stage::Request,
        ErrorCode::ValidationError,
        message,
    ))
}

/// Serializes `value` and adds `format_version` when it is an object without one.
fn versioned<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("response serializes");
    if let Value::Object(map) = &mut v {
        map.entry("format_version").or_insert(FORMAT_VERSION.into());
    }
    v
}

type AppState = Arc<TrainerService>;
type ApiResult = Result<Response, ApiError>;

fn ok<T: Serialize>(status: StatusCode, value: &T) -> ApiResult {
    Ok((status, Json(versioned(value))).into_response())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| {
            ApiError(ServiceError::new(
                Stage::Request,
                ErrorCode::StorageError,
                format!("worker failed: {e}"),
            ))
        })?
        .map_err(ApiError)
}

#[derive(Deserialize)]
struct NewLearner {
    display_name: String,
}

async fn create_learner(
    State(svc): State<AppState>,
    body: Result<Json<NewLearner>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body.map_err(|e| bad_request(e.body_text()))?;
    let learner = blocking(move || svc.create_learner(&body.display_name)).await?;
    ok(StatusCode::CREATED, &learner)
}

async fn submit_attempt(
    State(svc): State<AppState>,
    Path(learner_id): Path<String>,
    mut multipart: Multipart,
) -> ApiResult {
    let (mut audio, mut node_id, mut course_id) = (None, None, None);
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| bad_request(format!("multipart: {e}")))?
    {
        let name = field.name().unwrap_or_default().to_owned();
        match name.as_str() {
            "audio" => {
                let bytes = field
                    .bytes()
                    .await
                    .map_err(|e| bad_request(format!("audio: {e}")))?;
                audio = Some(bytes.to_vec());
            }
            "node_id" | "course_id" => {
                let text = field
                    .text()
                    .await
                    .map_err(|e| bad_request(format!("{name}: {e}")))?;
                let text = text.trim().to_owned();
                if name == "node_id" {
                    node_id = Some(text);
                } else if !text.is_empty() {
                    course_id = Some(text);
                }
            }
            _ => {}
        }
    }
    let audio = audio.ok_or_else(|| bad_request("missing multipart field audio"))?;
    let node_id = node_id.ok_or_else(|| bad_request("missing multipart field node_id"))?;
    let bundle =
        blocking(move || svc.submit_attempt(&learner_id, course_id.as_deref(), &node_id, &audio))
            .await?;
    ok(StatusCode::OK, &bundle)
}

async fn report(State(svc): State<AppState>, Path(learner_id): Path<String>) -> ApiResult {
    ok(StatusCode::OK, &svc.get_report(&learner_id)?)
}

async fn list_courses(State(svc): State<AppState>) -> ApiResult {
    #[derive(Serialize)]
    struct Courses<T> {
        courses: T,
    }
    ok(
        StatusCode::OK,
        &Courses {
            courses: svc.list_courses(),
        },
    )
}

async fn course(State(svc): State<AppState>, Path(course_id): Path<String>) -> ApiResult {
    ok(StatusCode::OK, &svc.course_script(&course_id)?)
}

async fn create_course(
    State(svc): State<AppState>,
    body: Result<Json<CustomCourseRequest>, JsonRejection>,
) -> ApiResult {
    let Json(request) = body.map_err(|e| bad_request(e.body_text()))?;
    let script = blocking(move || svc.create_custom_course(&request)).await?;
    ok(StatusCode::CREATED, &script)
}

#[derive(Deserialize)]
struct AdvanceBody {
    node_id: String,
    #[serde(default)]
    choice: usize,
}

async fn advance(
    State(svc): State<AppState>,
    Path((learner_id, course_id)): Path<(String, String)>,
    body: Result<Json<AdvanceBody>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body.map_err(|e| bad_request(e.body_text()))?;
    let outcome = svc.advance_course(&learner_id, &course_id, &body.node_id, body.choice)?;
    ok(StatusCode::OK, &outcome)
}

async fn artifact(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (bytes, kind) = svc.artifact(&id)?;
    Ok(([(header::CONTENT_TYPE, kind.content_type())], bytes).into_response())
}

pub fn router(service: Arc<TrainerService>) -> Router {
    Router::new()
        .route("/learners", post(create_learner))
        .route("/learners/{id}/attempts", post(submit_attempt))
        .route("/learners/{id}/report", get(report))
        .route("/learners/{id}/courses/{cid}/advance", post(advance))
        .route("/courses", get(list_courses).post(create_course))
        .route("/courses/{id}", get(course))
        .route("/artifacts/{id}", get(artifact))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(service)
}

/// Runs the service until Ctrl-C, then snapshots every learner.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let addr = format!("{}:{}", config.bind, config.port);
    let service =
        Arc::new(tokio::task::spawn_blocking(move || TrainerService::open(config)).await??);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    service.snapshot_all()?;
    Ok(())
}
