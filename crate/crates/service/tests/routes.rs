use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use doseopt_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(AppState::default()))
}

async fn send(app: Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn send_json(
    app: Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (status, bytes) = send(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn local_body(b: f64) -> Value {
    json!({"model": "2.3", "theta": {"b": b, "d": 1.0}, "target": "d", "T": 1.0})
}

#[tokio::test]
async fn local_design_with_certificates() {
    let (status, doc) = send_json(app(), "POST", "/v1/designs/local", Some(local_body(1.0))).await;
    assert_eq!(status, StatusCode::OK);
    let points: Vec<f64> = serde_json::from_value(doc["design"]["points"].clone()).unwrap();
    for (p, e) in points.iter().zip([0.0, 0.251, 1.0]) {
        assert!((p - e).abs() < 0.002, "{points:?}");
    }
    assert_eq!(doc["certificates"]["alternation"]["passed"], json!(true));
    assert_eq!(doc["certificates"]["c_bound"]["passed"], json!(true));
}

#[tokio::test]
async fn identical_requests_give_identical_bytes() {
    let (_, a) = send(app(), "POST", "/v1/designs/local", Some(local_body(0.7))).await;
    let (_, b) = send(app(), "POST", "/v1/designs/local", Some(local_body(0.7))).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn negative_rate_is_rejected_with_field() {
    let (status, err) = send_json(app(), "POST", "/v1/designs/local", Some(local_body(-1.0))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], json!("theta.b"));
    assert_eq!(err["code"], json!("invalid_parameter"));
}

#[tokio::test]
async fn malformed_body_is_a_validation_error() {
    let (status, err) = send_json(
        app(),
        "POST",
        "/v1/designs/maximin",
        Some(json!({"T": 1.0})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], json!("malformed_request"));
}

#[tokio::test]
async fn self_evaluation_is_fully_efficient() {
    let design =
        json!({"points": [0.0, 0.3, 0.6, 1.0], "weights": [0.25, 0.25, 0.25, 0.25], "T": 1.0});
    let body = json!({
        "design": design,
        "reference": design,
        "theta": {"b": 1.0},
        "requests": ["pairs", "d", "params"]
    });
    let (status, report) = send_json(app(), "POST", "/v1/designs/evaluate", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    for family in ["pair_effs", "d_effs", "param_effs"] {
        let map = report[family].as_object().unwrap();
        assert!(!map.is_empty());
        for v in map.values() {
            assert!((v.as_f64().unwrap() - 1.0).abs() < 1e-9, "{family}: {v}");
        }
    }
}

#[tokio::test]
async fn maximin_and_doptimal_documents() {
    let (status, doc) = send_json(
        app(),
        "POST",
        "/v1/designs/maximin",
        Some(json!({"theta": {"b": 1.0}, "T": 1.0})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        doc["efficiencies"]["pair_effs"].as_object().unwrap().len(),
        4
    );
    let body = json!({"model": "2.2", "theta": {"b": 1.0}, "T": 1.0});
    let (status, doc) = send_json(app(), "POST", "/v1/designs/doptimal", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["certificates"]["d_bound"]["passed"], json!(true));
}

#[tokio::test]
async fn transform_moves_the_middle_point() {
    let (_, doc) = send_json(app(), "POST", "/v1/designs/local", Some(local_body(1.0))).await;
    let body = json!({"design": doc, "to": {"b": 1.0, "d": 2.0, "T": 1.0}});
    let (status, moved) = send_json(app(), "POST", "/v1/designs/transform", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let before = doc["design"]["points"][1].as_f64().unwrap();
    let after = moved["design"]["points"][1].as_f64().unwrap();
    assert!((after - before.sqrt()).abs() < 1e-9);
    assert_eq!(moved["theta"]["d"], json!(2.0));

    let body = json!({"design": doc, "to": {"b": 5.0, "d": 1.0, "T": 1.0}});
    let (status, err) = send_json(app(), "POST", "/v1/designs/transform", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], json!("unreachable_scaling"));
}

#[tokio::test]
async fn models_list_parameters_and_edges() {
    let (status, body) = send_json(app(), "GET", "/v1/models", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["models"].as_array().unwrap().len(), 5);
    assert_eq!(body["models"][4]["params"].as_array().unwrap().len(), 4);
    assert_eq!(body["nesting"].as_array().unwrap().len(), 9);
}

#[tokio::test]
async fn unknown_job_is_not_found() {
    let (status, err) = send_json(app(), "GET", "/v1/jobs/999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], json!("not_found"));
}

#[tokio::test]
async fn invalid_simulation_is_rejected_before_queueing() {
    let body = json!({"true_theta": {"b": 0.08}, "sigma": -1.0});
    let (status, err) = send_json(app(), "POST", "/v1/simulate", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], json!("sigma"));
}

#[tokio::test(flavor = "multi_thread")]
async fn simulation_job_completes() {
    let app = app();
    let body = json!({
        "spec": {"true_theta": {"b": 0.08, "c": 0.1}, "reps": 20, "seed": 3},
        "designs": ["xi_mm"]
    });
    let (status, job) = send_json(app.clone(), "POST", "/v1/simulate", Some(body)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = job["id"].as_u64().unwrap();
    for _ in 0..600 {
        let (status, job) = send_json(app.clone(), "GET", &format!("/v1/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        match job["status"].as_str().unwrap() {
            "running" => tokio::time::sleep(Duration::from_millis(50)).await,
            "done" => {
                assert_eq!(job["report"]["rows"].as_array().unwrap().len(), 4);
                assert_eq!(job["report"]["seed"], json!(3));
                return;
            }
            other => panic!("job ended as {other}: {job}"),
        }
    }
    panic!("simulation job did not finish");
}
