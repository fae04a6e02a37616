#![allow(dead_code)]

use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use cogniplay_core::assessment::{canonical_answers, CognitiveCore};
use cogniplay_core::course::CourseGraph;
use cogniplay_service::config::ServiceConfig;
use cogniplay_service::store::Store;
use cogniplay_service::{api, AppState, Clock};

pub const IIC: u64 = 31285;

#[derive(Clone)]
pub struct ManualClock(Arc<Mutex<DateTime<Utc>>>);

impl ManualClock {
    pub fn new() -> Self {
        Self(Arc::new(Mutex::new(
            Utc.with_ymd_and_hms(2022, 4, 13, 9, 0, 0).unwrap(),
        )))
    }

    pub fn advance(&self, secs: i64) {
        *self.0.lock().unwrap() += Duration::seconds(secs);
    }

    pub fn clock(&self) -> Clock {
        let inner = self.0.clone();
        Arc::new(move || *inner.lock().unwrap())
    }
}

pub struct TestApp {
    pub state: AppState,
    pub router: Router,
    pub clock: ManualClock,
}

pub fn admin_config() -> ServiceConfig {
    ServiceConfig {
        bootstrap_admin: Some(("root".into(), "root@example.org".into(), "rootpw".into())),
        ..ServiceConfig::default()
    }
}

impl TestApp {
    pub fn with_store(store: Box<dyn Store>, clock: ManualClock) -> Self {
        let state = AppState::new(admin_config(), store, clock.clock()).unwrap();
        Self {
            router: api::router(state.clone()),
            state,
            clock,
        }
    }

    pub fn new() -> Self {
        Self::with_store(
            Box::new(cogniplay_service::store::MemoryStore::new()),
            ManualClock::new(),
        )
    }

    pub async fn call(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        let (status, text) = self.call_raw(method, path, token, body).await;
        let json = serde_json::from_str(&text).unwrap_or(Value::String(text));
        (status, json)
    }

    pub async fn call_raw(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    pub async fn get(&self, path: &str, token: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, Some(token), None).await
    }

    pub async fn post(&self, path: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(token), Some(body)).await
    }

    pub async fn login(&self, login: &str, password: &str) -> String {
        let (s, v) = self
            .call(
                Method::POST,
                "/api/v1/login",
                None,
                Some(serde_json::json!({ "login": login, "password": password })),
            )
            .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        v["token"].as_str().unwrap().to_string()
    }

    /// Register and log in a learner, returning (user_id, token).
    pub async fn learner(&self, name: &str) -> (u64, String) {
        let (s, v) = self
            .call(
                Method::POST,
                "/api/v1/register",
                None,
                Some(serde_json::json!({
                    "user_name": name,
                    "user_mail": format!("{name}@example.org"),
                    "password": "pw-123",
                    "gender": "female",
                })),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        (v["user_id"].as_u64().unwrap(), self.login(name, "pw-123").await)
    }

    pub async fn admin(&self) -> String {
        self.login("root", "rootpw").await
    }

    pub async fn enroll(&self, token: &str, core: CognitiveCore) -> Value {
        let (s, v) = self
            .post(
                &format!("/api/v1/courses/{IIC}/enroll"),
                token,
                serde_json::json!({ "answers": canonical_answers(core) }),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v
    }
}

pub fn course() -> CourseGraph {
    CourseGraph::instructional_innovation()
}

/// Answers for a quiz with the first `right` questions correct.
pub fn answers(graph: &CourseGraph, quiz: u64, right: usize) -> Vec<usize> {
    let q = graph
        .quizzes()
        .map(|(_, q)| q)
        .find(|q| q.quiz_id.0 == quiz)
        .unwrap();
    q.questions
        .iter()
        .enumerate()
        .map(|(i, qq)| {
            let c = qq.correct.unwrap();
            if i < right {
                c
            } else {
                (c + 1) % qq.options.len()
            }
        })
        .collect()
}
