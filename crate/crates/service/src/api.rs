use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coach_core::{Condition, FeedbackBundle, PreparationSheet};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::coach::{Coach, CoachError, MessageReply};
use crate::session::{ScenarioView, SessionView};

pub struct ApiError(CoachError);

impl From<CoachError> for ApiError {
    fn from(e: CoachError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            CoachError::WrongPhase { .. } | CoachError::Conflict => StatusCode::CONFLICT,
            CoachError::UnknownScenario(_) | CoachError::NotFound(_) => StatusCode::NOT_FOUND,
            CoachError::GatewayUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            CoachError::TooShortAnswer { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            CoachError::InvalidInput(_) => StatusCode::BAD_REQUEST,
            CoachError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let body = json!({ "error": { "code": self.0.code(), "message": self.0.to_string() } });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs a blocking coach call off the async workers.
async fn blocking<T, F>(coach: Arc<Coach>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Coach) -> Result<T, CoachError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&coach)).await {
        Ok(r) => r.map(Json).map_err(ApiError),
        Err(e) => Err(ApiError(CoachError::Store(crate::store::StoreError::Backend(format!("worker failed: {e}"))))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub scenario_id: String,
    pub condition: Condition,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostMessage {
    pub text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflection {
    pub answers: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Assignment {
    pub condition: Condition,
}

pub fn router(coach: Arc<Coach>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/scenarios", get(scenarios))
        .route("/assignments", post(assign))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/preparation", post(preparation))
        .route("/sessions/{id}/messages", post(message))
        .route("/sessions/{id}/feedback", get(feedback))
        .route("/sessions/{id}/reflection", post(reflection))
        .route("/sessions/{id}/second-trial", post(second_trial))
        .route("/sessions/{id}/survey", post(survey))
        .with_state(coach)
}

async fn scenarios(State(coach): State<Arc<Coach>>) -> Json<Vec<ScenarioView>> {
    Json(coach.scenarios())
}

async fn assign(State(coach): State<Arc<Coach>>) -> ApiResult<Assignment> {
    blocking(coach, |c| c.assign_condition().map(|condition| Assignment { condition })).await
}

async fn create_session(
    State(coach): State<Arc<Coach>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(view) =
        blocking(coach, move |c| c.create_session(&req.scenario_id, req.condition, req.seed).map(|s| (&s).into()))
            .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(coach): State<Arc<Coach>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    blocking(coach, move |c| c.get_session(&id).map(|s| (&s).into())).await
}

async fn preparation(
    State(coach): State<Arc<Coach>>,
    Path(id): Path<String>,
    Json(prep): Json<PreparationSheet>,
) -> ApiResult<SessionView> {
    blocking(coach, move |c| c.submit_preparation(&id, prep).map(|s| (&s).into())).await
}

async fn message(
    State(coach): State<Arc<Coach>>,
    Path(id): Path<String>,
    Json(req): Json<PostMessage>,
) -> ApiResult<MessageReply> {
    blocking(coach, move |c| c.post_message(&id, &req.text)).await
}

async fn feedback(State(coach): State<Arc<Coach>>, Path(id): Path<String>) -> ApiResult<FeedbackBundle> {
    blocking(coach, move |c| c.get_feedback(&id)).await
}

async fn reflection(
    State(coach): State<Arc<Coach>>,
    Path(id): Path<String>,
    Json(req): Json<Reflection>,
) -> ApiResult<SessionView> {
    blocking(coach, move |c| c.submit_reflection(&id, req.answers).map(|s| (&s).into())).await
}

async fn second_trial(
    State(coach): State<Arc<Coach>>,
    Path(id): Path<String>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(view) = blocking(coach, move |c| c.start_second_trial(&id).map(|s| (&s).into())).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn survey(
    State(coach): State<Arc<Coach>>,
    Path(id): Path<String>,
    Json(answers): Json<serde_json::Value>,
) -> ApiResult<SessionView> {
    blocking(coach, move |c| c.submit_survey(&id, answers).map(|s| (&s).into())).await
}
