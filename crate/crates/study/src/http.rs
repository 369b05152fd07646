//! JSON wire API over [`StudyService`].

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::StudyError;
use crate::service::{AnswerAck, PosttestView, PretestView, ReadmeAck, SessionView, StudyService};
use crate::session::Phase;
use crate::StudyReport;

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub participant_id: String,
    pub seed: u64,
    #[serde(default)]
    pub proficiency_score: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerItem {
    pub question_id: String,
    pub choice: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswersRequest {
    pub phase: Phase,
    pub answers: Vec<AnswerItem>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReadmeRequest {
    pub set_id: String,
    pub word: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuestionnaireRequest {
    pub set_id: String,
    pub rating: u8,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProficiencyRequest {
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl StudyError {
    pub fn status(&self) -> StatusCode {
        match self {
            StudyError::NotFound(_) => StatusCode::NOT_FOUND,
            StudyError::Duplicate(_) | StudyError::CapReached { .. } | StudyError::Precondition(_) => StatusCode::CONFLICT,
            StudyError::Invalid(_) => StatusCode::BAD_REQUEST,
            StudyError::MissingProficiency(_) | StudyError::Incomplete(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StudyError::Parse { .. } | StudyError::Io(_) | StudyError::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            log::error!("{self}");
        }
        (self.status(), Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<T, StudyError>;
type Svc = State<Arc<StudyService>>;

async fn create_session(State(svc): Svc, Json(req): Json<CreateSessionRequest>) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let view = svc.create_session(&req.participant_id, req.seed, req.proficiency_score)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn pretest(State(svc): Svc, Path(id): Path<String>) -> ApiResult<Json<PretestView>> {
    Ok(Json(svc.pretest(&id)?))
}

async fn answers(State(svc): Svc, Path(id): Path<String>, Json(req): Json<AnswersRequest>) -> ApiResult<Json<AnswerAck>> {
    let pairs: Vec<(String, String)> = req.answers.into_iter().map(|a| (a.question_id, a.choice)).collect();
    Ok(Json(svc.submit_answers(&id, req.phase, &pairs)?))
}

async fn posttest(State(svc): Svc, Path((id, set_id)): Path<(String, String)>) -> ApiResult<Json<PosttestView>> {
    Ok(Json(svc.posttest(&id, &set_id)?))
}

async fn readme(State(svc): Svc, Path(id): Path<String>, Json(req): Json<ReadmeRequest>) -> ApiResult<Json<ReadmeAck>> {
    Ok(Json(svc.readme(&id, &req.set_id, &req.word)?))
}

async fn questionnaire(State(svc): Svc, Path(id): Path<String>, Json(req): Json<QuestionnaireRequest>) -> ApiResult<StatusCode> {
    svc.questionnaire(&id, &req.set_id, req.rating)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn proficiency(State(svc): Svc, Path(id): Path<String>, Json(req): Json<ProficiencyRequest>) -> ApiResult<StatusCode> {
    svc.set_proficiency(&id, req.score)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn report(State(svc): Svc) -> ApiResult<Json<StudyReport>> {
    Ok(Json(svc.report()?))
}

pub fn router(service: Arc<StudyService>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/pretest", get(pretest))
        .route("/sessions/{id}/answers", post(answers))
        .route("/sessions/{id}/posttest/{set_id}", get(posttest))
        .route("/sessions/{id}/readme", post(readme))
        .route("/sessions/{id}/questionnaire", post(questionnaire))
        .route("/sessions/{id}/proficiency", post(proficiency))
        .route("/reports/study", get(report))
        .with_state(service)
}
