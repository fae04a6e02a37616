mod common;

use std::io::Write;

use axum::http::StatusCode;
use serde_json::json;

use cogniplay_core::assessment::CognitiveCore;
use cogniplay_service::store::{FileStore, JOURNAL_FILE};
use common::{answers, course, ManualClock, TestApp, IIC};

fn open(dir: &std::path::Path, clock: &ManualClock) -> TestApp {
    TestApp::with_store(Box::new(FileStore::open(dir).unwrap()), clock.clone())
}

#[tokio::test]
async fn restart_mid_course_restores_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new();
    let graph = course();
    let lessons: Vec<_> = graph.lessons().map(|(_, l)| l.clone()).collect();

    let app = open(dir.path(), &clock);
    let (_, a) = app.learner("ada").await;
    let (_, b) = app.learner("bea").await;
    app.enroll(&a, CognitiveCore::NT).await;
    app.enroll(&b, CognitiveCore::ST).await;
    for tok in [&a, &b] {
        clock.advance(40);
        let (s, _) = app
            .post(
                &format!("/api/v1/courses/{IIC}/lessons/{}/complete", lessons[0].lesson_id.0),
                tok,
                json!({}),
            )
            .await;
        assert_eq!(s, StatusCode::OK);
    }
    let q1 = lessons[0].quizzes[0].quiz_id.0;
    // NT has a timer running on the quiz; let it lapse before submitting so
    // a tick is journaled too.
    clock.advance(600);
    let (s, _) = app
        .post(
            &format!("/api/v1/quizzes/{q1}/attempts"),
            &a,
            json!({ "answers": answers(&graph, q1, 1), "time_spent_secs": 600 }),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED);
    let before = app.state.state_json();
    let view_before = app.get(&format!("/api/v1/courses/{IIC}/state"), &a).await.1;
    drop(app);

    let app = open(dir.path(), &clock);
    assert_eq!(app.state.state_json(), before);
    // Sessions live in memory only.
    let (s, _) = app.get(&format!("/api/v1/courses/{IIC}/state"), &a).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let a = app.login("ada", "pw-123").await;
    assert_eq!(app.get(&format!("/api/v1/courses/{IIC}/state"), &a).await.1, view_before);

    // The learner carries on where they stopped.
    clock.advance(30);
    let (s, v) = app
        .post(
            &format!("/api/v1/courses/{IIC}/lessons/{}/complete", lessons[1].lesson_id.0),
            &a,
            json!({}),
        )
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let journal = std::fs::read_to_string(dir.path().join(JOURNAL_FILE)).unwrap();
    assert_eq!(journal.lines().count(), app.state.lock().platform.journal().len());
}

#[tokio::test]
async fn torn_final_write_is_discarded_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new();
    let app = open(dir.path(), &clock);
    let (_, a) = app.learner("cyd").await;
    app.enroll(&a, CognitiveCore::SF).await;
    let before = app.state.state_json();
    drop(app);

    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(dir.path().join(JOURNAL_FILE))
        .unwrap();
    f.write_all(br#"{"seq":2,"op":"complete_lesson","learner":1,"cou"#).unwrap();
    drop(f);

    let app = open(dir.path(), &clock);
    assert_eq!(app.state.state_json(), before);
    let a = app.login("cyd", "pw-123").await;
    let lesson = course().lessons().next().unwrap().1.lesson_id.0;
    let (s, _) = app
        .post(&format!("/api/v1/courses/{IIC}/lessons/{lesson}/complete"), &a, json!({}))
        .await;
    assert_eq!(s, StatusCode::OK);
    drop(app);
    let app = open(dir.path(), &clock);
    assert_eq!(app.state.lock().platform.journal().len(), 2);
}

#[tokio::test]
async fn bootstrap_admin_is_created_once() {
    let dir = tempfile::tempdir().unwrap();
    let clock = ManualClock::new();
    drop(open(dir.path(), &clock));
    let app = open(dir.path(), &clock);
    app.admin().await;
    let accounts = std::fs::read_to_string(dir.path().join("accounts.jsonl")).unwrap();
    assert_eq!(accounts.lines().count(), 1);
    assert!(!accounts.contains("rootpw"));
}
