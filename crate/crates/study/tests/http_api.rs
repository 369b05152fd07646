mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use synsel_study::http::router;
use synsel_study::store::write_log;
use synsel_study::{SessionStore, StudyService};

fn app_with(store: SessionStore, catalog: synsel_study::catalog::Catalog) -> Router {
    let bank = common::bank(&catalog);
    router(Arc::new(StudyService::new(catalog, bank, store).unwrap()))
}

fn app() -> Router {
    app_with(SessionStore::in_memory(), common::catalog(30))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[tokio::test]
async fn full_session_flow() {
    let app = app();
    let (status, created) = call(&app, Method::POST, "/sessions", Some(json!({"participant_id": "amy", "seed": 4, "proficiency_score": 75.0}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(created["assigned_sets"].as_array().unwrap().len(), 15);
    assert!(created.get("model_assignment").is_none());

    let (status, again) = call(&app, Method::POST, "/sessions", Some(json!({"participant_id": "amy", "seed": 4}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(again, created);
    let (status, _) = call(&app, Method::POST, "/sessions", Some(json!({"participant_id": "amy", "seed": 5}))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, pre) = call(&app, Method::GET, &format!("/sessions/{id}/pretest"), None).await;
    assert_eq!(status, StatusCode::OK);
    let sets = pre["sets"].as_array().unwrap();
    assert_eq!(sets.len(), 15);
    assert!(sets[0].get("examples").is_none());
    assert!(sets[0]["questions"][0].get("gold").is_none());
    let set_id = sets[0]["set_id"].as_str().unwrap().to_string();

    let (status, _) = call(&app, Method::GET, &format!("/sessions/{id}/posttest/{set_id}"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let answers: Vec<Value> = sets
        .iter()
        .flat_map(|s| s["questions"].as_array().unwrap().iter())
        .map(|q| json!({"question_id": q["question_id"], "choice": q["choices"][1]}))
        .collect();
    let (status, ack) = call(&app, Method::POST, &format!("/sessions/{id}/answers"), Some(json!({"phase": "pretest", "answers": answers}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["recorded"], 45);
    assert_eq!(ack["pretest_complete"], true);

    let (status, post) = call(&app, Method::GET, &format!("/sessions/{id}/posttest/{set_id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(post["set"], sets[0]);
    let word = post["examples"][0]["word"].as_str().unwrap().to_string();
    assert_eq!(post["examples"][0]["revealed"].as_array().unwrap().len(), 0);

    for i in 0..3 {
        let (status, r) = call(&app, Method::POST, &format!("/sessions/{id}/readme"), Some(json!({"set_id": set_id, "word": word}))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(r["example_index"], i);
        assert_eq!(r["remaining"], 2 - i);
    }
    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/readme"), Some(json!({"set_id": set_id, "word": word}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(err["error"].as_str().unwrap().contains("cap"));
    let (_, post) = call(&app, Method::GET, &format!("/sessions/{id}/posttest/{set_id}"), None).await;
    assert_eq!(post["examples"][0]["revealed"].as_array().unwrap().len(), 3);

    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/questionnaire"), Some(json!({"set_id": set_id, "rating": 2}))).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/questionnaire"), Some(json!({"set_id": set_id, "rating": 7}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let post_answers: Vec<Value> = answers.iter().map(|a| json!({"question_id": a["question_id"], "choice": a["choice"]})).collect();
    let (status, ack) = call(&app, Method::POST, &format!("/sessions/{id}/answers"), Some(json!({"phase": "posttest", "answers": post_answers}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["posttest_complete"], true);

    let (status, report) = call(&app, Method::GET, "/reports/study", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["above"]["participants"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn unknown_session_is_not_found() {
    let app = app();
    let (status, body) = call(&app, Method::GET, "/sessions/ghost/pretest", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn report_requires_proficiency() {
    let app = app();
    call(&app, Method::POST, "/sessions", Some(json!({"participant_id": "zed", "seed": 1}))).await;
    let (status, body) = call(&app, Method::GET, "/reports/study", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("zed-1"));
}

#[tokio::test]
async fn report_endpoint_serves_fixture_cohort() {
    let fx = common::cohort();
    let dir = tempfile::tempdir().unwrap();
    for (id, events) in &fx.logs {
        write_log(dir.path(), id, events).unwrap();
    }
    let app = app_with(SessionStore::on_disk(dir.path()).unwrap(), fx.catalog);
    let (status, report) = call(&app, Method::GET, "/reports/study", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["above"]["participants"].as_array().unwrap().len(), 12);
    assert_eq!(report["below"]["participants"].as_array().unwrap().len(), 17);
    assert_eq!(report["improved"]["entailment"], 16);
    let emla = report["above"]["per_arm"]["entailment"]["improvement_mean"].as_f64().unwrap();
    assert!((emla - 0.75).abs() < 1e-12);
}
