//! Routes under `/api/v1`. Bodies are JSON except the log export, which is
//! CSV. Errors always use the `{"error": {...}}` shape.

use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use cogniplay_core::assessment::Choice;
use cogniplay_core::course::Submission;
use cogniplay_core::ids::{CourseId, LearnerId, LessonId, NodeId, QuizId, TopicId};
use cogniplay_core::platform::Command;

use crate::auth::{Account, PublicAccount, Role};
use crate::error::ApiError;
use crate::{AppState, NewAccount};

pub fn router(state: AppState) -> Router {
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/register", post(register))
        .route("/login", post(login))
        .route("/courses/{id}/enroll", post(enroll))
        .route("/courses/{id}/state", get(course_state))
        .route("/courses/{id}/nodes/{kind}/{node}", get(view_node))
        .route("/courses/{id}/lessons/{lesson}/complete", post(complete_lesson))
        .route("/courses/{id}/completion", post(complete_course))
        .route("/courses/{id}/leaderboard", get(leaderboard))
        .route("/courses/{id}/evaluation", post(evaluation))
        .route("/quizzes/{id}/attempts", post(attempt))
        .route("/quizzes/{id}/draft", put(save_draft))
        .route("/admin/courses/{id}/logs.csv", get(logs_csv))
        .route("/admin/courses/{id}/report", get(report));
    Router::new()
        .nest("/api/v1", v1)
        .fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
        })
        .with_state(state)
}

type ApiResult = Result<Response, ApiError>;

fn ok<T: Serialize>(status: StatusCode, body: &T) -> ApiResult {
    Ok((status, Json(body)).into_response())
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_body(e.to_string()))
}

fn id(raw: &str, what: &'static str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, what, format!("no {raw:?}")))
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn caller(state: &AppState, headers: &HeaderMap) -> Result<Account, ApiError> {
    state.lock().authenticate(bearer(headers), state.now())
}

fn learner_only(a: &Account) -> Result<LearnerId, ApiError> {
    match a.role {
        Role::Learner => Ok(a.learner_id()),
        _ => Err(ApiError::forbidden("only learners take courses")),
    }
}

fn staff_only(a: &Account) -> Result<(), ApiError> {
    if a.role.is_staff() {
        Ok(())
    } else {
        Err(ApiError::forbidden("instructor or admin role required"))
    }
}

async fn health(State(state): State<AppState>) -> ApiResult {
    let g = state.lock();
    ok(
        StatusCode::OK,
        &json!({ "status": "ok", "journal_len": g.platform.journal().len() }),
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterBody {
    user_name: String,
    user_mail: String,
    password: String,
    #[serde(default)]
    role: Option<Role>,
    #[serde(default)]
    gender: Option<String>,
}

async fn register(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let b: RegisterBody = parse(&body)?;
    let role = b.role.unwrap_or(Role::Learner);
    if role != Role::Learner {
        let who = caller(&state, &headers)?;
        if who.role != Role::Admin {
            return Err(ApiError::forbidden("only an admin can create staff accounts"));
        }
    }
    let account = state.register(NewAccount {
        user_name: b.user_name,
        user_mail: b.user_mail,
        password: b.password,
        role,
        gender: b.gender,
    })?;
    ok(StatusCode::CREATED, &PublicAccount::from(&account))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoginBody {
    /// User name or mail.
    login: String,
    password: String,
}

async fn login(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let b: LoginBody = parse(&body)?;
    ok(StatusCode::OK, &state.login(&b.login, &b.password)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnrollBody {
    answers: Vec<Choice>,
}

async fn enroll(
    State(state): State<AppState>,
    Path(course): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let learner = learner_only(&who)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let b: EnrollBody = parse(&body)?;
    let now = state.now();
    let mut g = state.lock();
    let outcome = g.execute(Some(learner), now, |at| Command::Enroll {
        learner,
        course,
        answers: b.answers,
        gender: who.gender.clone(),
        at,
    })?;
    let view = g.platform.learner_view(learner, course)?;
    ok(
        StatusCode::CREATED,
        &json!({
            "core": outcome.core,
            "active_elements": view.active_elements,
            "state": view,
        }),
    )
}

#[derive(Deserialize)]
struct StateQuery {
    learner: Option<u64>,
}

async fn course_state(
    State(state): State<AppState>,
    Path(course): Path<String>,
    Query(q): Query<StateQuery>,
    headers: HeaderMap,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let learner = match (who.role, q.learner) {
        (Role::Learner, Some(l)) if l != who.user_id => {
            return Err(ApiError::forbidden("learners may only read their own state"))
        }
        (Role::Learner, _) => who.learner_id(),
        (_, Some(l)) => LearnerId(l),
        (_, None) => return Err(ApiError::bad_body("the learner query parameter is required")),
    };
    let view = state.settled()?.platform.learner_view(learner, course)?;
    ok(StatusCode::OK, &view)
}

async fn view_node(
    State(state): State<AppState>,
    Path((course, kind, node)): Path<(String, String, String)>,
    headers: HeaderMap,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let learner = learner_only(&who)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let n = id(&node, "unknown_node")?;
    let node = match kind.as_str() {
        "topic" => NodeId::Topic(TopicId(n)),
        "lesson" => NodeId::Lesson(LessonId(n)),
        "quiz" => NodeId::Quiz(QuizId(n)),
        _ => return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_node", kind)),
    };
    let now = state.now();
    let outcome = state.lock().execute(Some(learner), now, |at| Command::ViewNode {
        learner,
        course,
        node,
        at,
    })?;
    ok(StatusCode::OK, &outcome)
}

async fn complete_lesson(
    State(state): State<AppState>,
    Path((course, lesson)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let learner = learner_only(&who)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let lesson = LessonId(id(&lesson, "unknown_node")?);
    let now = state.now();
    let outcome = state.lock().execute(Some(learner), now, |at| Command::CompleteLesson {
        learner,
        course,
        lesson,
        at,
    })?;
    ok(StatusCode::OK, &outcome)
}

async fn complete_course(
    State(state): State<AppState>,
    Path(course): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let learner = learner_only(&who)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let now = state.now();
    let outcome = state
        .lock()
        .execute(Some(learner), now, |at| Command::CompleteCourse { learner, course, at })?;
    ok(StatusCode::OK, &outcome)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttemptBody {
    #[serde(default)]
    answers: Option<Vec<Option<usize>>>,
    #[serde(default)]
    learner: Option<u64>,
    #[serde(default)]
    score: Option<u32>,
    #[serde(default)]
    time_spent_secs: u32,
}

/// Learners submit their answers. Staff record a score for a learner's
/// free-text attempt.
async fn attempt(
    State(state): State<AppState>,
    Path(quiz): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let quiz = QuizId(id(&quiz, "unknown_quiz")?);
    let b: AttemptBody = parse(&body)?;
    let (learner, submission) = if who.role.is_staff() {
        match (b.learner, b.score, b.answers) {
            (Some(l), Some(s), None) => (LearnerId(l), Submission::InstructorScore(s)),
            _ => return Err(ApiError::bad_body("staff submit learner and score")),
        }
    } else {
        if b.learner.is_some_and(|l| l != who.user_id) || b.score.is_some() {
            return Err(ApiError::forbidden("learners submit only their own answers"));
        }
        let Some(answers) = b.answers else {
            return Err(ApiError::bad_body("answers are required"));
        };
        (who.learner_id(), Submission::Answers(answers))
    };
    let now = state.now();
    let outcome = state.lock().execute(Some(learner), now, |at| Command::SubmitQuiz {
        learner,
        quiz,
        submission,
        time_spent_secs: b.time_spent_secs,
        at,
    })?;
    ok(StatusCode::CREATED, &outcome)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DraftBody {
    answers: Vec<Option<usize>>,
}

/// Save answers on a running timed quiz; they are submitted if time runs out.
async fn save_draft(
    State(state): State<AppState>,
    Path(quiz): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let learner = learner_only(&who)?;
    let quiz = QuizId(id(&quiz, "unknown_quiz")?);
    let b: DraftBody = parse(&body)?;
    let now = state.now();
    state.lock().execute(Some(learner), now, |at| Command::SaveDraft {
        learner,
        quiz,
        answers: b.answers,
        at,
    })?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn leaderboard(
    State(state): State<AppState>,
    Path(course): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let g = state.settled()?;
    let board = if who.role.is_staff() {
        g.platform.leaderboard(course)?
    } else {
        g.platform.leaderboard_for(who.learner_id(), course)?
    };
    ok(StatusCode::OK, &board)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluationBody {
    answers: BTreeMap<u8, u8>,
}

async fn evaluation(
    State(state): State<AppState>,
    Path(course): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let who = caller(&state, &headers)?;
    let learner = learner_only(&who)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let b: EvaluationBody = parse(&body)?;
    let count = b.answers.len();
    let now = state.now();
    state.lock().execute(Some(learner), now, |at| Command::SubmitEvaluation {
        learner,
        course,
        answers: b.answers,
        at,
    })?;
    ok(
        StatusCode::CREATED,
        &json!({ "learner_id": learner, "course_id": course, "statements": count }),
    )
}

async fn logs_csv(
    State(state): State<AppState>,
    Path(course): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    staff_only(&caller(&state, &headers)?)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let csv = state.settled()?.platform.export_log_csv(course)?;
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "text/csv; charset=utf-8")],
        csv,
    )
        .into_response())
}

async fn report(
    State(state): State<AppState>,
    Path(course): Path<String>,
    headers: HeaderMap,
) -> ApiResult {
    staff_only(&caller(&state, &headers)?)?;
    let course = CourseId(id(&course, "unknown_course")?);
    let report = state.settled()?.platform.report(course)?;
    ok(StatusCode::OK, &report)
}
