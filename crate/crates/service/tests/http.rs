mod common;

use axum::http::{Method, StatusCode};
use serde_json::{json, Value};

use cogniplay_core::assessment::CognitiveCore;
use cogniplay_core::telemetry::LOG_HEADER;
use common::{answers, course, TestApp, IIC};

fn code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap_or("")
}

/// Walk a learner through every lesson and quiz, passing each on the first
/// try. Essays are scored by `staff`.
async fn run_course(app: &TestApp, token: &str, learner: u64, staff: &str) {
    let graph = course();
    for (_, lesson) in graph.lessons() {
        app.clock.advance(60);
        let (s, v) = app
            .post(
                &format!("/api/v1/courses/{IIC}/lessons/{}/complete", lesson.lesson_id.0),
                token,
                json!({}),
            )
            .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        for q in &lesson.quizzes {
            app.clock.advance(30);
            let path = format!("/api/v1/quizzes/{}/attempts", q.quiz_id.0);
            let (s, v) = if q.activity_kind.instructor_scored() {
                app.post(&path, staff, json!({ "learner": learner, "score": q.total() }))
                    .await
            } else {
                let a = answers(&graph, q.quiz_id.0, q.questions.len());
                app.post(&path, token, json!({ "answers": a, "time_spent_secs": 30 }))
                    .await
            };
            assert_eq!(s, StatusCode::CREATED, "{v}");
            assert_eq!(v["attempt"]["passed"], true, "{v}");
        }
    }
}

#[tokio::test]
async fn register_login_and_conflicts() {
    let app = TestApp::new();
    let body = json!({ "user_name": "ana", "user_mail": "ana@example.org", "password": "pw" });
    let (s, v) = app.call(Method::POST, "/api/v1/register", None, Some(body.clone())).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["role"], "learner");
    assert!(v.get("credential").is_none());

    let dup = json!({ "user_name": "ana2", "user_mail": "ANA@example.org", "password": "pw" });
    let (s, v) = app.call(Method::POST, "/api/v1/register", None, Some(dup)).await;
    assert_eq!((s, code(&v)), (StatusCode::CONFLICT, "duplicate_account"));

    let bad = json!({ "user_name": "bo", "user_mail": "not-a-mail", "password": "pw" });
    let (s, v) = app.call(Method::POST, "/api/v1/register", None, Some(bad)).await;
    assert_eq!((s, code(&v)), (StatusCode::UNPROCESSABLE_ENTITY, "invalid_account"));

    let wrong = json!({ "login": "ana", "password": "nope" });
    let (s, v) = app.call(Method::POST, "/api/v1/login", None, Some(wrong)).await;
    assert_eq!((s, code(&v)), (StatusCode::UNAUTHORIZED, "bad_credentials"));
    assert!(v.get("token").is_none());

    // Mail works as a login too.
    app.login("ana@example.org", "pw").await;
}

#[tokio::test]
async fn staff_accounts_need_an_admin() {
    let app = TestApp::new();
    let staff = json!({
        "user_name": "ines", "user_mail": "ines@example.org", "password": "pw", "role": "instructor"
    });
    let (s, _) = app.call(Method::POST, "/api/v1/register", None, Some(staff.clone())).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (_, learner) = app.learner("leo").await;
    let (s, _) = app.post("/api/v1/register", &learner, staff.clone()).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let admin = app.admin().await;
    let (s, v) = app.post("/api/v1/register", &admin, staff).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["role"], "instructor");
}

#[tokio::test]
async fn fail_then_retake_unlocks_and_reports_progress() {
    let app = TestApp::new();
    let (_, tok) = app.learner("sofia").await;
    let v = app.enroll(&tok, CognitiveCore::SF).await;
    assert_eq!(v["core"], "SF");
    assert_eq!(v["state"]["progress"], json!({ "completed": 0, "total": 14, "percent": 0 }));

    let graph = course();
    let lessons: Vec<_> = graph.lessons().map(|(_, l)| l.clone()).collect();
    let q1 = lessons[0].quizzes[0].quiz_id.0;
    let q2 = lessons[1].quizzes[0].quiz_id.0;

    // The quiz opens only once its lesson is done.
    let (s, v) = app
        .post(&format!("/api/v1/quizzes/{q1}/attempts"), &tok, json!({ "answers": [0] }))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::FORBIDDEN, "locked"));

    let (s, v) = app
        .post(
            &format!("/api/v1/courses/{IIC}/lessons/{}/complete", lessons[0].lesson_id.0),
            &tok,
            json!({}),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");

    let (s, v) = app.get(&format!("/api/v1/courses/{IIC}/nodes/quiz/{q1}"), &tok).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["content"]["node"]["id"], q1);

    app.clock.advance(90);
    let wrong = answers(&graph, q1, 0);
    let (s, v) = app
        .post(
            &format!("/api/v1/quizzes/{q1}/attempts"),
            &tok,
            json!({ "answers": wrong, "time_spent_secs": 105 }),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["attempt"]["passed"], false);
    assert_eq!(v["attempt"]["percentage"], 0);

    let (s, v) = app
        .post(&format!("/api/v1/quizzes/{q2}/attempts"), &tok, json!({ "answers": [0, 0] }))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::FORBIDDEN, "locked"));

    app.clock.advance(90);
    let right = answers(&graph, q1, 1);
    let (s, v) = app
        .post(
            &format!("/api/v1/quizzes/{q1}/attempts"),
            &tok,
            json!({ "answers": right, "time_spent_secs": 83 }),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["attempt"]["passed"], true);
    assert_eq!(v["attempt"]["points"], 10);
    let unlocked = v["delta"]["unlocked"].as_array().unwrap();
    assert!(unlocked.contains(&json!({ "kind": "lesson", "id": lessons[1].lesson_id.0 })), "{v}");
    // Only elements in the SF tuple surface.
    let active: Vec<Value> = app.get(&format!("/api/v1/courses/{IIC}/state"), &tok).await.1
        ["active_elements"]
        .as_array()
        .unwrap()
        .clone();
    for e in v["effects"].as_array().unwrap() {
        assert!(e["element"].is_null() || active.contains(&e["element"]), "{e} outside {active:?}");
    }

    let (s, v) = app.get(&format!("/api/v1/courses/{IIC}/state"), &tok).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["progress"], json!({ "completed": 2, "total": 14, "percent": 14 }));
}

#[tokio::test]
async fn cross_learner_access_is_forbidden() {
    let app = TestApp::new();
    let (a_id, a) = app.learner("amy").await;
    let (b_id, b) = app.learner("ben").await;
    app.enroll(&a, CognitiveCore::NT).await;
    app.enroll(&b, CognitiveCore::NF).await;

    let (s, _) = app.get(&format!("/api/v1/courses/{IIC}/state?learner={b_id}"), &a).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = app.get(&format!("/api/v1/courses/{IIC}/state?learner={a_id}"), &a).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = app.get(&format!("/api/v1/admin/courses/{IIC}/report"), &a).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = app.get(&format!("/api/v1/admin/courses/{IIC}/logs.csv"), &a).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, v) = app
        .post("/api/v1/quizzes/30381/attempts", &a, json!({ "learner": b_id, "answers": [0] }))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::FORBIDDEN, "forbidden"));
    let (s, _) = app
        .post("/api/v1/quizzes/30381/attempts", &a, json!({ "score": 1 }))
        .await;
    assert_eq!(s, StatusCode::FORBIDDEN);

    let (s, v) = app.call(Method::GET, &format!("/api/v1/courses/{IIC}/state"), None, None).await;
    assert_eq!((s, code(&v)), (StatusCode::UNAUTHORIZED, "unauthorized"));
    let (s, _) = app.get(&format!("/api/v1/courses/{IIC}/state"), "forged-token").await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);

    // Staff can read any learner.
    let admin = app.admin().await;
    let (s, v) = app.get(&format!("/api/v1/courses/{IIC}/state?learner={b_id}"), &admin).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["core"], "NF");
}

#[tokio::test]
async fn leaderboard_follows_the_tuple() {
    let app = TestApp::new();
    let (_, sf) = app.learner("sal").await;
    let (_, nt) = app.learner("nia").await;
    app.enroll(&sf, CognitiveCore::SF).await;
    app.enroll(&nt, CognitiveCore::NT).await;
    let path = format!("/api/v1/courses/{IIC}/leaderboard");
    let (s, v) = app.get(&path, &sf).await;
    assert_eq!((s, code(&v)), (StatusCode::FORBIDDEN, "element_inactive"));
    let (s, v) = app.get(&path, &nt).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 2);
    let admin = app.admin().await;
    assert_eq!(app.get(&path, &admin).await.0, StatusCode::OK);
}

#[tokio::test]
async fn full_course_evaluation_and_exports() {
    let app = TestApp::new();
    let admin = app.admin().await;

    let (s, csv) = app
        .call_raw(Method::GET, &format!("/api/v1/admin/courses/{IIC}/logs.csv"), Some(&admin), None)
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(csv.trim_end(), LOG_HEADER);

    let (id, tok) = app.learner("nora").await;
    app.enroll(&tok, CognitiveCore::NF).await;

    let eval: Value = (1..=17).map(|i| (i.to_string(), json!(5))).collect::<serde_json::Map<_, _>>().into();
    let (s, v) = app
        .post(&format!("/api/v1/courses/{IIC}/evaluation"), &tok, json!({ "answers": eval }))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::FORBIDDEN, "survey_locked"));

    let (s, v) = app.post(&format!("/api/v1/courses/{IIC}/completion"), &tok, json!({})).await;
    assert_eq!((s, code(&v)), (StatusCode::CONFLICT, "course_not_finished"));

    run_course(&app, &tok, id, &admin).await;
    let (s, v) = app.post(&format!("/api/v1/courses/{IIC}/completion"), &tok, json!({})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["award"]["first_time"], true);

    let (s, v) = app
        .post(&format!("/api/v1/courses/{IIC}/evaluation"), &tok, json!({ "answers": eval }))
        .await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(v["statements"], 17);
    let (s, v) = app
        .post(&format!("/api/v1/courses/{IIC}/evaluation"), &tok, json!({ "answers": eval }))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::CONFLICT, "already_evaluated"));

    let (s, csv) = app
        .call_raw(Method::GET, &format!("/api/v1/admin/courses/{IIC}/logs.csv"), Some(&admin), None)
        .await;
    assert_eq!(s, StatusCode::OK);
    let expected = app.state.lock().platform.export_log_csv(cogniplay_core::ids::CourseId(IIC)).unwrap();
    assert_eq!(csv, expected);
    assert_eq!(csv.lines().count(), 1 + 7);

    let (s, v) = app.get(&format!("/api/v1/admin/courses/{IIC}/report"), &admin).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["attempts_logged"], 7);
    assert_eq!(v["cohort"]["n"], 1);
    assert!(v["evaluation"].is_object());
    // Survey answers never leave the service, only their aggregates.
    assert!(!v.to_string().contains("\"answers\""));
}

#[tokio::test]
async fn bad_requests_get_structured_errors() {
    let app = TestApp::new();
    let (_, tok) = app.learner("eve").await;
    let (s, v) = app.post("/api/v1/courses/999/enroll", &tok, json!({ "answers": vec!["A"; 14] })).await;
    assert_eq!((s, code(&v)), (StatusCode::NOT_FOUND, "unknown_course"));
    let (s, v) = app.post("/api/v1/courses/abc/enroll", &tok, json!({})).await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{v}");
    let (s, v) = app
        .post(&format!("/api/v1/courses/{IIC}/enroll"), &tok, json!({ "answers": vec!["A"; 13] }))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::UNPROCESSABLE_ENTITY, "invalid_assessment"));
    let (s, v) = app
        .post(&format!("/api/v1/courses/{IIC}/enroll"), &tok, json!({ "answers": "yes" }))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::UNPROCESSABLE_ENTITY, "invalid_body"));
    app.enroll(&tok, CognitiveCore::ST).await;
    let (s, v) = app
        .post(&format!("/api/v1/courses/{IIC}/enroll"), &tok, json!({ "answers": vec!["A"; 14] }))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::CONFLICT, "already_enrolled"));
    let (s, v) = app.get("/api/v1/nowhere", &tok).await;
    assert_eq!((s, code(&v)), (StatusCode::NOT_FOUND, "not_found"));
    let (s, v) = app.call(Method::GET, "/api/v1/health", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn failed_write_leaves_memory_matching_storage() {
    let store = cogniplay_service::store::MemoryStore::new();
    let app = TestApp::with_store(Box::new(store.clone()), common::ManualClock::new());
    let (_, tok) = app.learner("fay").await;
    app.enroll(&tok, CognitiveCore::NT).await;
    let before = app.state.state_json();

    store.fail_writes(true);
    let lesson = course().lessons().next().unwrap().1.lesson_id.0;
    let (s, v) = app
        .post(&format!("/api/v1/courses/{IIC}/lessons/{lesson}/complete"), &tok, json!({}))
        .await;
    assert_eq!((s, code(&v)), (StatusCode::INTERNAL_SERVER_ERROR, "storage"));
    assert_eq!(app.state.state_json(), before);

    store.fail_writes(false);
    let (s, _) = app
        .post(&format!("/api/v1/courses/{IIC}/lessons/{lesson}/complete"), &tok, json!({}))
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(store.snapshot().journal.len(), 2);
}

#[tokio::test]
async fn expired_timer_submits_the_saved_draft() {
    let app = TestApp::new();
    let (_, tok) = app.learner("nadia").await;
    let admin = app.admin().await;
    app.enroll(&tok, CognitiveCore::NT).await;
    let graph = course();
    let lessons: Vec<_> = graph.lessons().map(|(_, l)| l.clone()).collect();
    let (q1, q2) = (lessons[0].quizzes[0].quiz_id.0, lessons[1].quizzes[0].quiz_id.0);
    let done = |l: usize| format!("/api/v1/courses/{IIC}/lessons/{}/complete", lessons[l].lesson_id.0);
    app.post(&done(0), &tok, json!({})).await;
    let (s, _) = app
        .post(&format!("/api/v1/quizzes/{q1}/attempts"), &tok, json!({ "answers": answers(&graph, q1, 1) }))
        .await;
    assert_eq!(s, StatusCode::CREATED);
    app.post(&done(1), &tok, json!({})).await;

    let draft = format!("/api/v1/quizzes/{q2}/draft");
    let (s, v) = app.call(Method::PUT, &draft, Some(&tok), Some(json!({ "answers": [0, null] }))).await;
    assert_eq!((s, code(&v)), (StatusCode::CONFLICT, "no_timer"));

    let (_, v) = app.get(&format!("/api/v1/courses/{IIC}/nodes/quiz/{q2}"), &tok).await;
    assert!(v["effects"].as_array().unwrap().iter().any(|e| e["effect"] == "timer_started"), "{v}");
    app.clock.advance(30);
    let first = answers(&graph, q2, 1)[0];
    let (s, _) = app.call(Method::PUT, &draft, Some(&tok), Some(json!({ "answers": [first, null] }))).await;
    assert_eq!(s, StatusCode::NO_CONTENT);

    // Reading after the limit sees the draft graded without another request.
    app.clock.advance(200);
    let (_, v) = app.get(&format!("/api/v1/courses/{IIC}/state"), &tok).await;
    let node = v["nodes"].as_array().unwrap().iter().find(|n| n["node"]["id"] == q2).unwrap();
    assert_eq!(node["best_points"], 5, "{node}");
    let (_, csv) = app.call_raw(Method::GET, &format!("/api/v1/admin/courses/{IIC}/logs.csv"), Some(&admin), None).await;
    let row = csv.lines().last().unwrap();
    assert!(row.contains(&format!("{q2},1,2,")) && row.ends_with(",3m 0s,NO,31285"), "{row}");
}
