use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use arena_core::lights::LightTaskConfig;
use arena_core::trading::MarketConfig;
use arena_core::{create_episode, parse_action, Difficulty, EnvKind, TaskPayload, TaskSpec};
use arena_curation::{sample_task, SuiteProfile};
use arena_service::{router, AppState, ServiceConfig, SharedState};
use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use serde_json::{json, Value};
use tower::ServiceExt;

fn tasks() -> Vec<TaskSpec> {
    vec![
        TaskSpec::new("lights-tutorial", 0, 10, Difficulty::Easy, TaskPayload::Lights(LightTaskConfig::tutorial())),
        TaskSpec::new("trading-tutorial", 0, 3, Difficulty::Medium, TaskPayload::Trading(MarketConfig::tutorial())),
    ]
}

fn state() -> SharedState {
    AppState::new(tasks(), ServiceConfig::default())
}

async fn call(state: &SharedState, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = router(Arc::clone(state)).oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn open(state: &SharedState, body: Value) -> String {
    let (status, v) = call(state, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

async fn step(state: &SharedState, id: &str, action: &str) -> (StatusCode, Value) {
    call(state, Method::POST, &format!("/sessions/{id}/step"), Some(json!({"action": action}))).await
}

#[tokio::test]
async fn health_and_task_listing() {
    let s = state();
    let (status, v) = call(&s, Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!({"status": "ok", "tasks": 2, "sessions": 0}));
    let (_, v) = call(&s, Method::GET, "/tasks", None).await;
    assert_eq!(v.as_array().unwrap().len(), 2);
    let (_, v) = call(&s, Method::GET, "/tasks?env=trading", None).await;
    assert_eq!(
        v,
        json!([{"task_id": "trading-tutorial", "env_kind": "trading", "difficulty": "medium", "step_budget": 3}])
    );
    let (status, _) = call(&s, Method::GET, "/tasks?env=chess", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn play_lights_to_the_end() {
    let s = state();
    let id = open(&s, json!({"task_id": "lights-tutorial"})).await;
    let (_, v) = call(&s, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(v["observation"]["text"], "○ ○ ○");
    assert_eq!(v["status"], "running");
    assert_eq!(v["remaining_steps"], 10);
    assert!(v.get("rules_text").is_none());

    let (status, v) = step(&s, &id, "1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["step_index"], 0);
    assert_eq!(v["done"], false);
    for a in ["0", "2"] {
        step(&s, &id, a).await;
    }
    let (_, v) = step(&s, &id, "1").await;
    assert_eq!(
        (v["done"].clone(), v["success"].clone(), v["status"].clone()),
        (json!(true), json!(true), json!("success"))
    );
    assert_eq!(v["observation"]["text"], "● ● ●");

    let (status, v) = step(&s, &id, "0").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "conflict");
}

#[tokio::test]
async fn rules_text_only_when_revealed() {
    let s = state();
    let id = open(&s, json!({"task_id": "lights-tutorial", "rules_revealed": true, "actor_tag": "p1"})).await;
    let (_, v) = call(&s, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(v["rules_text"].as_str().unwrap(), LightTaskConfig::tutorial().rules_text());
    assert_eq!(v["actor_tag"], "p1");
    assert!(v["observation"]["text"].as_str().unwrap().starts_with("Rules:\n"));
}

#[tokio::test]
async fn error_codes() {
    let s = state();
    let (status, v) = call(&s, Method::POST, "/sessions", Some(json!({"task_id": "nope-001"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");
    assert_eq!(v["task_id"], "nope-001");

    let (status, v) = call(&s, Method::POST, "/sessions", Some(json!({"rules_revealed": true}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad_request");
    let (status, _) =
        call(&s, Method::POST, "/sessions", Some(json!({"task_id": "lights-tutorial", "colour": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&s, Method::GET, "/sessions/not-a-uuid", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&s, Method::GET, &format!("/sessions/{}", uuid_like()), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = open(&s, json!({"task_id": "lights-tutorial"})).await;
    let (status, _) = call(&s, Method::POST, &format!("/sessions/{id}/step"), Some(json!({"move": "1"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    // A malformed action is the agent's mistake: it costs a step.
    let (status, v) = step(&s, &id, "the left one").await;
    assert_eq!(status, StatusCode::OK);
    assert!(v["feedback"].as_str().unwrap().starts_with("Invalid action format"));
    assert_eq!(v["remaining_steps"], 9);
}

fn uuid_like() -> &'static str {
    "00000000-0000-4000-8000-000000000000"
}

#[tokio::test]
async fn exported_trace_matches_the_engine() {
    let s = state();
    let id = open(&s, json!({"task_id": "trading-tutorial", "actor_tag": "human-7"})).await;
    let wire = [
        r#"{"buy": {"S0": 100}, "sell": {}}"#,
        r#"{"buy": {"S1": 51}, "sell": {"S0": 100}}"#,
        r#"{"buy": {}, "sell": {}}"#,
    ];
    for w in wire {
        let (status, _) = step(&s, &id, w).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, export) = call(&s, Method::GET, &format!("/sessions/{id}/trace"), None).await;
    assert_eq!(export["actor_tag"], "human-7");
    assert_eq!(export["step_timestamps"].as_array().unwrap().len(), 3);
    assert!(export["created_at"].as_str().unwrap().ends_with('Z'));

    let mut ep = create_episode(Arc::new(tasks().remove(1)), false).unwrap();
    for w in wire {
        ep.step(parse_action(EnvKind::Trading, w)).unwrap();
    }
    let served: arena_core::Trace = serde_json::from_value(export["trace"].clone()).unwrap();
    assert_eq!(served.to_canonical(), ep.trace().to_canonical());
    assert_eq!(served.status, arena_core::EpisodeStatus::Success);
}

#[tokio::test]
async fn sessions_from_env_seed_and_tier() {
    let s = state();
    let body = json!({"env": "lights", "seed": 42, "tier": "hard"});
    let a = open(&s, body.clone()).await;
    let b = open(&s, body).await;
    assert_ne!(a, b);
    let (_, va) = call(&s, Method::GET, &format!("/sessions/{a}"), None).await;
    let (_, vb) = call(&s, Method::GET, &format!("/sessions/{b}"), None).await;
    assert_eq!(va["task_id"], "lite-lights-hard-s42");
    assert_eq!(va["difficulty"], "hard");
    assert_eq!(va["observation"], vb["observation"]);
    let (status, _) = call(&s, Method::POST, "/sessions", Some(json!({"env": "lights"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn idle_sessions_are_swept() {
    let s = AppState::new(tasks(), ServiceConfig { idle_timeout: Duration::from_secs(60), ..ServiceConfig::default() });
    let id = open(&s, json!({"task_id": "lights-tutorial"})).await;
    assert_eq!(s.sweep_idle(Instant::now()), 0);
    assert_eq!(s.sweep_idle(Instant::now() + Duration::from_secs(61)), 1);
    let (status, _) = call(&s, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/sessions")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let resp = router(state()).oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_steps_are_serialized() {
    let s = state();
    let id = open(&s, json!({"task_id": "lights-tutorial"})).await;
    // Index 9 is out of range: every step is inert, so only the budget ends the episode.
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let s = Arc::clone(&s);
            let id = id.clone();
            tokio::spawn(async move { step(&s, &id, "9").await })
        })
        .collect();
    let mut indices = BTreeSet::new();
    let mut conflicts = 0;
    for h in handles {
        let (status, v) = h.await.unwrap();
        match status {
            StatusCode::OK => assert!(indices.insert(v["step_index"].as_u64().unwrap())),
            StatusCode::CONFLICT => conflicts += 1,
            other => panic!("unexpected {other}"),
        }
    }
    assert_eq!(indices, (0..10).collect());
    assert_eq!(conflicts, 6);
    let (_, export) = call(&s, Method::GET, &format!("/sessions/{id}/trace"), None).await;
    assert_eq!(export["trace"]["records"].as_array().unwrap().len(), 10);
    assert_eq!(export["trace"]["status"], "budget_exhausted");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_sessions_are_independent() {
    let s = state();
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let s = Arc::clone(&s);
            tokio::spawn(async move {
                let id = open(&s, json!({"task_id": "lights-tutorial", "actor_tag": format!("p{i}")})).await;
                let mut last = Value::Null;
                for a in ["0", "2", "1"] {
                    last = step(&s, &id, a).await.1;
                }
                last
            })
        })
        .collect();
    for h in handles {
        assert_eq!(h.await.unwrap()["success"], true);
    }
    assert_eq!(s.session_count(), 8);
}

#[tokio::test]
async fn lite_lights_budget_and_trace_directory() {
    let dir = tempfile::tempdir().unwrap();
    let task = sample_task(&SuiteProfile::lite(), 0, EnvKind::Lights, 0).unwrap();
    let task_id = task.task_id.clone();
    let config = ServiceConfig { trace_dir: Some(dir.path().to_path_buf()), ..ServiceConfig::default() };
    let s = AppState::new([task], config);
    let (_, v) = call(&s, Method::POST, "/sessions", Some(json!({"task_id": task_id}))).await;
    assert_eq!(v["remaining_steps"], 200);
    let id = v["session_id"].as_str().unwrap().to_string();
    let mut last = Value::Null;
    for i in 0..200 {
        let (status, v) = step(&s, &id, "99").await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["status"], if i < 199 { "running" } else { "budget_exhausted" });
        if i == 100 {
            let (_, partial) = call(&s, Method::GET, &format!("/sessions/{id}/trace"), None).await;
            assert_eq!(partial["trace"]["status"], "running");
        }
        last = v;
    }
    assert_eq!(last["remaining_steps"], 0);
    let written = std::fs::read_to_string(dir.path().join(format!("{id}.json"))).unwrap();
    let export: Value = serde_json::from_str(&written).unwrap();
    assert_eq!(export["trace"]["records"].as_array().unwrap().len(), 200);
    assert_eq!(export["trace"]["status"], "budget_exhausted");
}
