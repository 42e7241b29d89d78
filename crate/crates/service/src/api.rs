//! JSON endpoints consumed by the browser UI.
//!
//! | method | path                  | body / query                                   |
//! |--------|-----------------------|------------------------------------------------|
//! | POST   | `/api/predict`        | `[{"input": [..], "img_src"?, "json_src"?}]`   |
//! | GET    | `/api/predictions`    | `outlier_tolerance`, `class_confidence_threshold` |
//! | GET    | `/api/plot/{id}`      | same thresholds                                |
//! | GET    | `/api/model/summary`  |                                                |
//!
//! Thresholds default to `0.95` / `0.7` when omitted.

use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use scatteruq_core::dataio::{Modality, ModelBundle, Payload, BUNDLE_FORMAT_VERSION};
use scatteruq_core::plotengine::{build_local_plot, display_label, route, LocalPlot, Thresholds, UseCase};
use scatteruq_core::uqhead::Prediction;

/// Loaded bundle plus the predictions made during this session. Ids are
/// indices into `predictions` and never change once assigned.
pub struct AppState {
    bundle: Arc<ModelBundle>,
    predictions: RwLock<Vec<Prediction>>,
}

impl AppState {
    pub fn new(bundle: ModelBundle) -> Self {
        Self::shared(Arc::new(bundle))
    }

    pub fn shared(bundle: Arc<ModelBundle>) -> Self {
        Self {
            bundle,
            predictions: RwLock::new(Vec::new()),
        }
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }

    pub fn prediction_count(&self) -> usize {
        self.predictions.read().expect("prediction store poisoned").len()
    }

    pub fn prediction(&self, id: usize) -> Option<Prediction> {
        self.predictions.read().expect("prediction store poisoned").get(id).cloned()
    }

    /// Scores every input and appends the batch atomically. Nothing is
    /// stored if any input fails.
    pub fn predict_batch(&self, inputs: Vec<PredictInput>) -> Result<Vec<PredictedRecord>, ApiError> {
        let dim = self.bundle.input_dim();
        for (i, inp) in inputs.iter().enumerate() {
            if inp.input.len() != dim {
                return Err(ApiError::Unprocessable(format!(
                    "[{i}].input has {} values, model expects {dim}",
                    inp.input.len()
                )));
            }
            if let Some(j) = inp.input.iter().position(|v| !v.is_finite()) {
                return Err(ApiError::Unprocessable(format!("[{i}].input[{j}] is not finite")));
            }
        }
        let mut scored = Vec::with_capacity(inputs.len());
        for inp in inputs {
            let payload = if inp.img_src.is_none() && inp.json_src.is_none() {
                derived_payload(&self.bundle.modality, &inp.input)
            } else {
                Payload {
                    img_src: inp.img_src,
                    json_src: inp.json_src,
                }
            };
            let pred = self
                .bundle
                .predict(&inp.input, payload)
                .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
            scored.push(pred);
        }
        let mut store = self.predictions.write().expect("prediction store poisoned");
        let first = store.len();
        store.extend(scored.iter().cloned());
        drop(store);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, prediction)| PredictedRecord { id: first + i, prediction })
            .collect())
    }
}

fn derived_payload(modality: &Modality, x: &[f64]) -> Payload {
    let sample: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    modality.payload(&sample)
}

pub type SharedState = Arc<AppState>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictInput {
    pub input: Vec<f64>,
    #[serde(default)]
    pub img_src: Option<String>,
    #[serde(default)]
    pub json_src: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictedRecord {
    pub id: usize,
    #[serde(flatten)]
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedRecord {
    pub id: usize,
    pub use_case: UseCase,
    pub display_label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub labels: Vec<String>,
    pub num_classes: usize,
    pub examples_per_class: usize,
    pub embedding_dim: usize,
    pub input_dim: usize,
    pub modality: Modality,
    pub default_thresholds: Thresholds,
    pub bundle_format_version: u32,
}

impl ModelSummary {
    pub fn of(bundle: &ModelBundle) -> Self {
        Self {
            labels: bundle.labels().to_vec(),
            num_classes: bundle.head.num_classes(),
            examples_per_class: bundle.store.examples_per_class(),
            embedding_dim: bundle.head.embedding_dim(),
            input_dim: bundle.input_dim(),
            modality: bundle.modality.clone(),
            default_thresholds: Thresholds::default(),
            bundle_format_version: BUNDLE_FORMAT_VERSION,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct ThresholdQuery {
    pub outlier_tolerance: Option<f64>,
    pub class_confidence_threshold: Option<f64>,
}

impl ThresholdQuery {
    fn resolve(self) -> Result<Thresholds, ApiError> {
        let d = Thresholds::default();
        Thresholds::new(
            self.outlier_tolerance.unwrap_or(d.outlier_tolerance),
            self.class_confidence_threshold.unwrap_or(d.class_confidence_threshold),
        )
        .map_err(|e| ApiError::BadRequest { message: e.to_string(), path: None })
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest { message: String, path: Option<String> },
    NotFound(String),
    Unprocessable(String),
    Internal(String),
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApiError::BadRequest { message, path: Some(p) } => write!(f, "{p}: {message}"),
            ApiError::BadRequest { message, path: None }
            | ApiError::NotFound(message)
            | ApiError::Unprocessable(message)
            | ApiError::Internal(message) => f.write_str(message),
        }
    }
}

impl std::error::Error for ApiError {}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message, path) = match &self {
            ApiError::BadRequest { message, path } => (StatusCode::BAD_REQUEST, message, path.as_deref()),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m, None),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m, None),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m, None),
        };
        if status.is_server_error() {
            tracing::error!("{message}");
        }
        (status, Json(ErrorBody { error: message, path })).into_response()
    }
}

fn thresholds(query: Result<Query<ThresholdQuery>, QueryRejection>) -> Result<Thresholds, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::BadRequest {
        message: e.body_text(),
        path: None,
    })?;
    q.resolve()
}

async fn predict_handler(State(state): State<SharedState>, body: Bytes) -> Result<Json<Vec<PredictedRecord>>, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(&body);
    let inputs: Vec<PredictInput> = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::BadRequest {
            message: e.into_inner().to_string(),
            path: Some(path),
        }
    })?;
    let n = inputs.len();
    let out = state.predict_batch(inputs)?;
    tracing::debug!(count = n, "stored predictions");
    Ok(Json(out))
}

async fn predictions_handler(
    State(state): State<SharedState>,
    query: Result<Query<ThresholdQuery>, QueryRejection>,
) -> Result<Json<Vec<RoutedRecord>>, ApiError> {
    let th = thresholds(query)?;
    let store = state.predictions.read().expect("prediction store poisoned");
    Ok(Json(
        store
            .iter()
            .enumerate()
            .map(|(id, p)| {
                let uc = route(p, &th);
                RoutedRecord {
                    id,
                    use_case: uc,
                    display_label: display_label(p, uc).to_string(),
                }
            })
            .collect(),
    ))
}

async fn plot_handler(
    State(state): State<SharedState>,
    Path(id): Path<usize>,
    query: Result<Query<ThresholdQuery>, QueryRejection>,
) -> Result<Json<LocalPlot>, ApiError> {
    let th = thresholds(query)?;
    let pred = state
        .prediction(id)
        .ok_or_else(|| ApiError::NotFound(format!("no prediction with id {id}")))?;
    let bundle = &state.bundle;
    build_local_plot(&pred, &th, &bundle.store, &bundle.head)
        .map(Json)
        .map_err(|e| ApiError::Internal(e.to_string()))
}

async fn summary_handler(State(state): State<SharedState>) -> Json<ModelSummary> {
    Json(ModelSummary::of(&state.bundle))
}

async fn api_not_found() -> ApiError {
    ApiError::NotFound("unknown endpoint".into())
}

pub fn router(state: SharedState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/predict", post(predict_handler))
        .route("/predictions", get(predictions_handler))
        .route("/plot/{id}", get(plot_handler))
        .route("/model/summary", get(summary_handler))
        .fallback(api_not_found)
        .with_state(state);
    let app = Router::new().nest("/api", api);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}
