//! Browser demo: a small model trained on synthetic blobs, a batch of test
//! samples (some between classes, some far away) and three operations the
//! page drives from its sliders.
//!
//! [`DemoModel`] holds the logic and is usable natively; [`Demo`] is the
//! JavaScript-facing wrapper that exchanges JSON strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use scatteruq_core::dataio::{gaussian_blobs, ModelBundle};
use scatteruq_core::dimred::{project, Method};
use scatteruq_core::drmetrics::DRQuality;
use scatteruq_core::embednet::TrainConfig;
use scatteruq_core::plotengine::{
    build_local_plot, display_label, local_points, route, select_classes, LocalPlot, Thresholds, UseCase,
};
use scatteruq_core::uqhead::{HeadConfig, Prediction};
use scatteruq_core::Result;

pub const INPUT_DIM: usize = 5;
pub const CLASS_NAMES: [&str; 3] = ["alpha", "beta", "gamma"];
const SPACING: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub id: usize,
    /// How the sample was generated: `"blob"`, `"between"` or `"far"`.
    pub origin: &'static str,
    pub use_case: UseCase,
    pub display_label: String,
    pub predicted_label: String,
    pub max_confidence: f64,
    pub outlier_score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub seconds: f64,
    #[serde(flatten)]
    pub quality: DRQuality,
    pub coords: Vec<[f64; 2]>,
}

pub struct DemoModel {
    bundle: ModelBundle,
    samples: Vec<(&'static str, Prediction)>,
}

fn centers() -> Vec<Vec<f64>> {
    (0..CLASS_NAMES.len())
        .map(|k| (0..INPUT_DIM).map(|d| if d == k { SPACING } else { 0.0 }).collect())
        .collect()
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

impl DemoModel {
    pub fn new(seed: u64) -> Result<Self> {
        let c = centers();
        let names = CLASS_NAMES.iter().map(|s| s.to_string()).collect();
        let train = gaussian_blobs(&c, 60, 0.7, seed)?.with_label_names(names)?;
        let tc = TrainConfig {
            epochs: 8,
            episodes_per_epoch: 30,
            n_support: 4,
            n_query: 4,
            learning_rate: 5e-3,
            hidden_dims: vec![16],
            embedding_dim: 4,
            rng_seed: seed,
            ..TrainConfig::default()
        };
        let hc = HeadConfig { seed, ..HeadConfig::default() };
        let bundle = ModelBundle::fit(&train, &tc, &hc)?;

        let mut inputs: Vec<(&'static str, Vec<f64>)> = Vec::new();
        let test = gaussian_blobs(&c, 4, 0.7, seed.wrapping_add(1))?;
        for i in 0..test.len() {
            inputs.push(("blob", test.sample_f64(i)));
        }
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            for t in [0.4, 0.5, 0.6] {
                inputs.push(("between", lerp(&c[a], &c[b], t)));
            }
        }
        let far: Vec<Vec<f64>> = vec![vec![-6.0; INPUT_DIM], vec![9.0; INPUT_DIM]];
        let far_set = gaussian_blobs(&far, 3, 1.0, seed.wrapping_add(2))?;
        for i in 0..far_set.len() {
            inputs.push(("far", far_set.sample_f64(i)));
        }

        let samples = inputs
            .into_iter()
            .map(|(origin, x)| {
                let payload = bundle.modality.payload(&x.iter().map(|&v| v as f32).collect::<Vec<_>>());
                Ok((origin, bundle.predict(&x, payload)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bundle, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn prediction(&self, id: usize) -> Option<&Prediction> {
        self.samples.get(id).map(|(_, p)| p)
    }

    pub fn route_samples(&self, th: &Thresholds) -> Vec<SampleRow> {
        self.samples
            .iter()
            .enumerate()
            .map(|(id, (origin, p))| {
                let uc = route(p, th);
                SampleRow {
                    id,
                    origin,
                    use_case: uc,
                    display_label: display_label(p, uc).to_string(),
                    predicted_label: p.predicted_label.clone(),
                    max_confidence: p.max_confidence(),
                    outlier_score: p.outlier_score,
                }
            })
            .collect()
    }

    fn sample(&self, id: usize) -> Result<&Prediction> {
        self.prediction(id).ok_or_else(|| {
            scatteruq_core::Error::Validation(format!("no sample {id} (have {})", self.samples.len()))
        })
    }

    pub fn local_plot(&self, id: usize, th: &Thresholds) -> Result<LocalPlot> {
        build_local_plot(self.sample(id)?, th, &self.bundle.store, &self.bundle.head)
    }

    /// Projects the local point set of `id` with every method and scores
    /// each projection.
    pub fn compare_methods(&self, id: usize, th: &Thresholds) -> Result<Vec<MethodResult>> {
        let pred = self.sample(id)?;
        let classes = select_classes(pred, route(pred, th), &self.bundle.head)?;
        let points = local_points(pred, &classes, &self.bundle.store)?;
        [Method::Pca, Method::Mds, Method::Tsne]
            .into_iter()
            .map(|m| {
                let proj = project(&points, m, 0)?;
                let quality = DRQuality::compute(&points, &proj.rows())?;
                Ok(MethodResult {
                    method: m,
                    seconds: proj.elapsed_seconds,
                    quality,
                    coords: proj.coords,
                })
            })
            .collect()
    }
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

#[wasm_bindgen]
pub struct Demo {
    inner: DemoModel,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Demo, JsError> {
        Ok(Demo {
            inner: DemoModel::new(u64::from(seed)).map_err(js_err)?,
        })
    }

    #[wasm_bindgen(js_name = classNames)]
    pub fn class_names(&self) -> Result<String, JsError> {
        to_json(&self.inner.bundle.labels())
    }

    #[wasm_bindgen(js_name = routeSamples)]
    pub fn route_samples(&self, outlier_tolerance: f64, confidence_threshold: f64) -> Result<String, JsError> {
        let th = Thresholds::new(outlier_tolerance, confidence_threshold).map_err(js_err)?;
        to_json(&self.inner.route_samples(&th))
    }

    #[wasm_bindgen(js_name = localPlot)]
    pub fn local_plot(&self, id: usize, outlier_tolerance: f64, confidence_threshold: f64) -> Result<String, JsError> {
        let th = Thresholds::new(outlier_tolerance, confidence_threshold).map_err(js_err)?;
        to_json(&self.inner.local_plot(id, &th).map_err(js_err)?)
    }

    #[wasm_bindgen(js_name = compareMethods)]
    pub fn compare_methods(&self, id: usize, outlier_tolerance: f64, confidence_threshold: f64) -> Result<String, JsError> {
        let th = Thresholds::new(outlier_tolerance, confidence_threshold).map_err(js_err)?;
        to_json(&self.inner.compare_methods(id, &th).map_err(js_err)?)
    }
}
