use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use scatteruq_core::dataio::{gaussian_blobs, Dataset, ModelBundle};
use scatteruq_core::embednet::TrainConfig;
use scatteruq_core::plotengine::{route, Thresholds};
use scatteruq_core::uqhead::{HeadConfig, Prediction};
use scatteruq_service::{router, AppState};

const DIM: usize = 6;

fn centers() -> Vec<Vec<f64>> {
    (0..3)
        .map(|k| (0..DIM).map(|d| if d == k { 4.0 } else { 0.0 }).collect())
        .collect()
}

fn fixture() -> (Arc<AppState>, Dataset) {
    let data = gaussian_blobs(&centers(), 40, 0.6, 3).unwrap();
    let tc = TrainConfig {
        epochs: 5,
        episodes_per_epoch: 20,
        n_support: 3,
        n_query: 3,
        learning_rate: 1e-2,
        hidden_dims: vec![12],
        embedding_dim: 4,
        ..TrainConfig::default()
    };
    let bundle = ModelBundle::fit(&data, &tc, &HeadConfig::default()).unwrap();
    (Arc::new(AppState::new(bundle)), data)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn call_raw(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::post(uri).body(Body::from(body.to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn inputs(rows: &[Vec<f64>]) -> Value {
    Value::Array(rows.iter().map(|r| json!({ "input": r })).collect())
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

#[tokio::test]
async fn empty_batch_returns_empty_array() {
    let (state, _) = fixture();
    let app = router(state, None);
    let (status, body) = call(&app, "POST", "/api/predict", Some(json!([]))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([]));
}

#[tokio::test]
async fn predict_returns_records_with_ids_and_prediction_fields() {
    let (state, data) = fixture();
    let app = router(state.clone(), None);
    let rows: Vec<Vec<f64>> = (0..3).map(|i| data.sample_f64(i * 40)).collect();
    let (status, body) = call(&app, "POST", "/api/predict", Some(inputs(&rows))).await;
    assert_eq!(status, StatusCode::OK);
    let arr = body.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    for (i, rec) in arr.iter().enumerate() {
        assert_eq!(rec["id"], json!(i));
        for key in ["class_confidence_scores", "outlier_score", "embeddings", "predicted_label", "json_src"] {
            assert!(rec.get(key).is_some(), "missing {key} in {rec}");
        }
        assert_eq!(rec["class_confidence_scores"].as_object().unwrap().len(), 3);
        assert_eq!(rec["embeddings"].as_array().unwrap().len(), 4);
    }
    // A second batch continues the id sequence.
    let (_, body) = call(&app, "POST", "/api/predict", Some(inputs(&rows[..1]))).await;
    assert_eq!(body[0]["id"], json!(3));
    assert_eq!(state.prediction_count(), 4);
}

#[tokio::test]
async fn supplied_payload_is_kept() {
    let (state, data) = fixture();
    let app = router(state, None);
    let body = json!([{ "input": data.sample_f64(0), "img_src": "data:image/png;base64,AAAA" }]);
    let (status, out) = call(&app, "POST", "/api/predict", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out[0]["img_src"], json!("data:image/png;base64,AAAA"));
    assert!(out[0].get("json_src").is_none());
}

#[tokio::test]
async fn malformed_bodies_are_400_with_a_path() {
    let (state, _) = fixture();
    let app = router(state.clone(), None);
    let (status, body) = call(&app, "POST", "/api/predict", Some(json!([{ "input": [1.0, "x"] }]))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["path"], json!("[0].input[1]"));

    let (status, body) = call(&app, "POST", "/api/predict", Some(json!([{ "inptu": [1.0] }]))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("inptu"));

    let (status, _) = call_raw(&app, "/api/predict", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/api/predict", Some(json!({ "input": [] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(state.prediction_count(), 0);
}

#[tokio::test]
async fn wrong_dimension_is_422_and_stores_nothing() {
    let (state, data) = fixture();
    let app = router(state.clone(), None);
    let body = json!([{ "input": data.sample_f64(0) }, { "input": vec![0.0; DIM + 1] }]);
    let (status, out) = call(&app, "POST", "/api/predict", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(out["error"].as_str().unwrap().contains("[1]"));
    assert_eq!(state.prediction_count(), 0);
}

#[tokio::test]
async fn threshold_validation() {
    let (state, data) = fixture();
    let app = router(state, None);
    call(&app, "POST", "/api/predict", Some(inputs(&[data.sample_f64(0)]))).await;
    for q in [
        "outlier_tolerance=1.5",
        "class_confidence_threshold=-0.1",
        "outlier_tolerance=abc",
        "class_confidence_threshold=NaN",
    ] {
        let (status, body) = call(&app, "GET", &format!("/api/predictions?{q}"), None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{q}: {body}");
        let (status, _) = call(&app, "GET", &format!("/api/plot/0?{q}"), None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{q}");
    }
    let (status, body) = call(&app, "GET", "/api/predictions?outlier_tolerance=0&class_confidence_threshold=1", None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
}

#[tokio::test]
async fn unknown_ids_and_paths_are_404() {
    let (state, _) = fixture();
    let app = router(state, None);
    assert_eq!(call(&app, "GET", "/api/plot/0", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/api/plot/99999999", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/api/nothing", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn summary_reports_classes_m_and_d() {
    let (state, _) = fixture();
    let app = router(state, None);
    let (status, body) = call(&app, "GET", "/api/model/summary", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["labels"], json!(["c0", "c1", "c2"]));
    assert_eq!(body["examples_per_class"], json!(10));
    assert_eq!(body["embedding_dim"], json!(4));
    assert_eq!(body["input_dim"], json!(DIM));
    assert_eq!(body["default_thresholds"]["outlier_tolerance"], json!(0.95));
}

#[tokio::test]
async fn permissive_sliders_route_everything_to_u1() {
    let (state, data) = fixture();
    let app = router(state, None);
    let mut rows: Vec<Vec<f64>> = (0..20).map(|i| data.sample_f64(i * 6)).collect();
    rows.push(vec![40.0; DIM]);
    call(&app, "POST", "/api/predict", Some(inputs(&rows))).await;
    let uri = "/api/predictions?outlier_tolerance=1&class_confidence_threshold=0";
    let (_, first) = call(&app, "GET", uri, None).await;
    for rec in first.as_array().unwrap() {
        assert_eq!(rec["use_case"], json!("U1_HighConfidence"));
        assert_ne!(rec["display_label"], json!("OTHER"));
    }
    let (_, second) = call(&app, "GET", uri, None).await;
    assert_eq!(first, second);
}

#[tokio::test]
async fn routing_matches_the_library_for_1000_pairs() {
    let (state, data) = fixture();
    let app = router(state.clone(), None);
    let c = centers();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut rows = Vec::new();
    for i in 0..30 {
        rows.push(data.sample_f64(i * 4));
    }
    for _ in 0..10 {
        let (a, b) = (rng.random_range(0..3), rng.random_range(0..3));
        rows.push(lerp(&c[a], &c[b], rng.random_range(0.0..1.0)));
    }
    for _ in 0..10 {
        rows.push((0..DIM).map(|_| rng.random_range(-15.0..15.0)).collect());
    }
    call(&app, "POST", "/api/predict", Some(inputs(&rows))).await;
    let preds: Vec<Prediction> = (0..rows.len()).map(|i| state.prediction(i).unwrap()).collect();

    let mut pairs = 0;
    while pairs < 1000 {
        let snap = |v: f64, rng: &mut ChaCha8Rng| if rng.random_bool(0.3) { (v * 20.0).round() / 20.0 } else { v };
        let tol = snap(rng.random_range(0.0..=1.0), &mut rng);
        let thr = snap(rng.random_range(0.0..=1.0), &mut rng);
        let th = Thresholds::new(tol, thr).unwrap();
        let uri = format!("/api/predictions?outlier_tolerance={tol}&class_confidence_threshold={thr}");
        let (status, body) = call(&app, "GET", &uri, None).await;
        assert_eq!(status, StatusCode::OK);
        for (p, rec) in preds.iter().zip(body.as_array().unwrap()) {
            let expected = serde_json::to_value(route(p, &th)).unwrap();
            assert_eq!(rec["use_case"], expected, "tol {tol} thr {thr}");
            pairs += 1;
        }
    }
}

#[tokio::test]
async fn plot_follows_the_sliders() {
    let (state, _) = fixture();
    let app = router(state.clone(), None);
    let c = centers();
    // Find a point between two blobs whose confidence is not saturated.
    let mut id = None;
    for k in 0..=20 {
        let x = lerp(&c[0], &c[1], 0.3 + 0.02 * k as f64);
        let (_, out) = call(&app, "POST", "/api/predict", Some(inputs(&[x]))).await;
        let rid = out[0]["id"].as_u64().unwrap() as usize;
        if state.prediction(rid).unwrap().max_confidence() < 0.999 {
            id = Some(rid);
            break;
        }
    }
    let id = id.expect("no unsaturated prediction on the segment");

    let (status, u1) = call(&app, "GET", &format!("/api/plot/{id}?outlier_tolerance=1&class_confidence_threshold=0"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(u1["use_case"], json!("U1_HighConfidence"));
    assert_eq!(u1["train_points"].as_array().unwrap().len() + 1, 12);
    assert_eq!(u1["classes_shown"].as_array().unwrap().len(), 1);
    assert_eq!(u1["scree"].as_array().unwrap().len(), 5);
    let u1_classes: std::collections::BTreeSet<u64> =
        u1["contours"].as_array().unwrap().iter().map(|c| c["class_id"].as_u64().unwrap()).collect();
    assert!(u1_classes.len() <= 1);

    let (status, u2) = call(&app, "GET", &format!("/api/plot/{id}?outlier_tolerance=1&class_confidence_threshold=1"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(u2["use_case"], json!("U2_ClassConfusion"));
    assert_eq!(u2["train_points"].as_array().unwrap().len() + 1, 23);
    assert_eq!(u2["test_point"]["display_label"], json!("OTHER"));
    let u2_classes: std::collections::BTreeSet<u64> =
        u2["contours"].as_array().unwrap().iter().map(|c| c["class_id"].as_u64().unwrap()).collect();
    assert_eq!(u2_classes.len(), 2);
}

#[tokio::test]
async fn requests_never_change_the_model() {
    let (state, data) = fixture();
    let app = router(state.clone(), None);
    let before_bytes = state.bundle().to_bytes().unwrap();
    let probe = inputs(&[data.sample_f64(7), vec![9.0; DIM]]);
    let (_, first) = call(&app, "POST", "/api/predict", Some(probe.clone())).await;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..40 {
        let x: Vec<f64> = (0..DIM).map(|_| rng.random_range(-5.0..5.0)).collect();
        call(&app, "POST", "/api/predict", Some(inputs(&[x]))).await;
        let q = format!(
            "outlier_tolerance={}&class_confidence_threshold={}",
            rng.random_range(0.0..=1.0),
            rng.random_range(0.0..=1.0)
        );
        call(&app, "GET", &format!("/api/plot/{}?{q}", i % 3), None).await;
        call(&app, "GET", &format!("/api/predictions?{q}"), None).await;
        call(&app, "GET", "/api/model/summary", None).await;
    }

    let (_, again) = call(&app, "POST", "/api/predict", Some(probe)).await;
    for (a, b) in first.as_array().unwrap().iter().zip(again.as_array().unwrap()) {
        let strip = |v: &Value| {
            let mut v = v.clone();
            v.as_object_mut().unwrap().remove("id");
            v
        };
        assert_eq!(strip(a), strip(b));
    }
    assert_eq!(state.bundle().to_bytes().unwrap(), before_bytes);
}

#[tokio::test]
async fn concurrent_posts_get_unique_ids() {
    let (state, data) = fixture();
    let app = router(state.clone(), None);
    let mut handles = Vec::new();
    for t in 0..8 {
        let app = app.clone();
        let rows: Vec<Vec<f64>> = (0..5).map(|i| data.sample_f64(t * 5 + i)).collect();
        handles.push(tokio::spawn(async move { call(&app, "POST", "/api/predict", Some(inputs(&rows))).await }));
    }
    let mut ids = Vec::new();
    for h in handles {
        let (status, body) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        let batch: Vec<u64> = body.as_array().unwrap().iter().map(|r| r["id"].as_u64().unwrap()).collect();
        assert!(batch.windows(2).all(|w| w[1] == w[0] + 1));
        ids.extend(batch);
    }
    ids.sort_unstable();
    assert_eq!(ids, (0..40).collect::<Vec<u64>>());
}

#[tokio::test]
async fn static_assets_are_served_outside_the_api() {
    let (state, _) = fixture();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>hi</p>").unwrap();
    let app = router(state, Some(dir.path().to_path_buf()));
    let (status, body) = call(&app, "GET", "/index.html", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!("<p>hi</p>"));
    assert_eq!(call(&app, "GET", "/api/model/summary", None).await.0, StatusCode::OK);
}
