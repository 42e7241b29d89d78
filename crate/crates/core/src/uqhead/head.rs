use indexmap::IndexMap;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kde::DistanceCalibrator;
use super::prediction::Prediction;
use super::store::TrainingExampleStore;
use crate::dataio::{Dataset, Payload};
use crate::embednet::{softmax_neg, EmbeddingModel};
use crate::error::{Error, Result};
use crate::linalg::{condition_number, squared_euclidean};

/// Relative regularization added to covariance diagonals.
const COV_RIDGE: f64 = 1e-3;
/// Absolute floor on that ridge, for embeddings with no spread at all.
const COV_RIDGE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    /// Share of each class held out to calibrate the outlier score.
    pub calib_fraction: f64,
    /// Training examples kept per class for plotting.
    pub examples_per_class: usize,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            calib_fraction: 0.2,
            examples_per_class: 10,
            seed: 0,
        }
    }
}

/// Prototypes, covariance statistics and calibrators fitted on embeddings.
///
/// Class confidences are a temperature-scaled softmax over negative squared
/// Euclidean distances to the prototypes. The outlier score is the KDE CDF of
/// calibration distances evaluated at the smallest relative Mahalanobis
/// distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqHead {
    labels: Vec<String>,
    prototypes: Vec<Vec<f64>>,
    shared_covariance: DMatrix<f64>,
    shared_precision: DMatrix<f64>,
    background_mean: DVector<f64>,
    background_covariance: DMatrix<f64>,
    background_precision: DMatrix<f64>,
    calibrator: DistanceCalibrator,
    temperature: f64,
}

/// Output of [`fit_head`].
#[derive(Debug, Clone)]
pub struct FittedHead {
    pub head: UqHead,
    pub store: TrainingExampleStore,
    /// Per-class indices (into the fitting dataset) used for prototypes and
    /// covariances; the remainder was held out for calibration.
    pub fit_indices: Vec<Vec<usize>>,
}

fn invert_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.inverse()).ok_or_else(|| {
        Error::Numerical(format!(
            "{what} covariance is not positive definite after regularization (condition number {:.3e})",
            condition_number(m)
        ))
    })
}

fn regularize(mut cov: DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let mean_diag = cov.diagonal().sum() / d as f64;
    let eps = (COV_RIDGE * mean_diag).max(COV_RIDGE_FLOOR);
    for i in 0..d {
        cov[(i, i)] += eps;
    }
    cov
}

fn quad_form(precision: &DMatrix<f64>, diff: &DVector<f64>) -> f64 {
    (precision * diff).dot(diff)
}

impl UqHead {
    /// Assembles a head from explicit statistics. Covariances are used as
    /// given (no regularization) and must be positive definite.
    pub fn from_parts(
        labels: Vec<String>,
        prototypes: Vec<Vec<f64>>,
        shared_covariance: DMatrix<f64>,
        background_mean: Vec<f64>,
        background_covariance: DMatrix<f64>,
        calibrator: DistanceCalibrator,
        temperature: f64,
    ) -> Result<Self> {
        if labels.is_empty() || labels.len() != prototypes.len() {
            return Err(Error::invalid("need one label per prototype"));
        }
        let d = prototypes[0].len();
        if prototypes.iter().any(|p| p.len() != d) || background_mean.len() != d {
            return Err(Error::invalid("prototype dimensions differ"));
        }
        for m in [&shared_covariance, &background_covariance] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::Shape {
                    what: "covariance",
                    expected: d,
                    got: m.nrows(),
                });
            }
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid("temperature must be positive"));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::invalid(format!("duplicate class label {dup:?}")));
        }
        Ok(Self {
            shared_precision: invert_spd(&shared_covariance, "shared class")?,
            background_precision: invert_spd(&background_covariance, "background")?,
            labels,
            prototypes,
            shared_covariance,
            background_mean: DVector::from_vec(background_mean),
            background_covariance,
            calibrator,
            temperature,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.background_mean.len()
    }

    pub fn prototypes(&self) -> &[Vec<f64>] {
        &self.prototypes
    }

    pub fn shared_covariance(&self) -> &DMatrix<f64> {
        &self.shared_covariance
    }

    pub fn background_covariance(&self) -> &DMatrix<f64> {
        &self.background_covariance
    }

    pub fn background_mean(&self) -> &[f64] {
        self.background_mean.as_slice()
    }

    pub fn calibrator(&self) -> &DistanceCalibrator {
        &self.calibrator
    }

    pub fn calib_distances(&self) -> &[f64] {
        self.calibrator.distances()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid("temperature must be positive"));
        }
        Ok(Self {
            temperature,
            ..self.clone()
        })
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.embedding_dim() {
            return Err(Error::Shape {
                what: "embedding",
                expected: self.embedding_dim(),
                got: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding contains non-finite values"));
        }
        Ok(())
    }

    pub fn squared_distances(&self, z: &[f64]) -> Vec<f64> {
        self.prototypes.iter().map(|p| squared_euclidean(z, p)).collect()
    }

    /// Class probabilities by class id.
    pub fn class_confidences(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        Ok(softmax_neg(&self.squared_distances(z), self.temperature))
    }

    /// Squared Mahalanobis distance to each prototype under the shared class
    /// covariance, minus the squared Mahalanobis distance to the background
    /// Gaussian.
    pub fn relative_mahalanobis(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let zv = DVector::from_column_slice(z);
        let background = quad_form(&self.background_precision, &(&zv - &self.background_mean));
        Ok(self
            .prototypes
            .iter()
            .map(|p| quad_form(&self.shared_precision, &(&zv - DVector::from_column_slice(p))) - background)
            .collect())
    }

    /// `(class id, distance)` of the smallest relative Mahalanobis distance.
    pub fn closest_class(&self, z: &[f64]) -> Result<(usize, f64)> {
        let rmd = self.relative_mahalanobis(z)?;
        Ok(rmd
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("head has at least one class"))
    }

    pub fn outlier_score(&self, z: &[f64]) -> Result<f64> {
        Ok(self.calibrator.cdf(self.closest_class(z)?.1))
    }

    pub fn predict_embedding(&self, z: Vec<f64>, payload: Payload) -> Result<Prediction> {
        let conf = self.class_confidences(&z)?;
        let outlier_score = self.outlier_score(&z)?;
        let class_confidence_scores: IndexMap<String, f64> =
            self.labels.iter().cloned().zip(conf).collect();
        let mut pred = Prediction {
            class_confidence_scores,
            outlier_score,
            embedding: z,
            img_src: payload.img_src,
            json_src: payload.json_src,
            predicted_label: String::new(),
        };
        pred.predicted_label = self.labels[pred.predicted_class()].clone();
        Ok(pred)
    }

    /// Mean negative log-likelihood of the true classes at `temperature`.
    fn nll(&self, embeddings: &[Vec<f64>], labels: &[usize], temperature: f64) -> f64 {
        let total: f64 = embeddings
            .iter()
            .zip(labels)
            .map(|(z, &y)| {
                let d = self.squared_distances(z);
                -crate::embednet::log_softmax_neg(&d, temperature)[y]
            })
            .sum();
        total / embeddings.len() as f64
    }

    /// Golden-section search over log-temperature minimizing held-out NLL.
    fn fit_temperature(&self, embeddings: &[Vec<f64>], labels: &[usize]) -> f64 {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (1e-4f64.ln(), 1e4f64.ln());
        let f = |u: f64| self.nll(embeddings, labels, u.exp());
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 1e-6 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d);
            }
        }
        (0.5 * (a + b)).exp()
    }
}

/// Embeds the given dataset rows, 512 at a time.
pub(crate) fn embed_rows(model: &EmbeddingModel, data: &Dataset, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(512) {
        let x = DMatrix::from_fn(data.input_dim(), chunk.len(), |r, c| data.sample(chunk[c])[r] as f64);
        let z = model.forward_batch(&x)?;
        out.extend(z.column_iter().map(|c| c.iter().copied().collect::<Vec<_>>()));
    }
    Ok(out)
}

/// Fits prototypes, pooled and background covariances, the outlier
/// calibrator and the confidence temperature, then samples the example store.
pub fn fit_head(model: &EmbeddingModel, data: &Dataset, cfg: &HeadConfig) -> Result<FittedHead> {
    if !(cfg.calib_fraction > 0.0 && cfg.calib_fraction <= 0.5) {
        return Err(Error::invalid(format!(
            "calib_fraction must lie in (0, 0.5], got {}",
            cfg.calib_fraction
        )));
    }
    if data.input_dim() != model.input_dim() {
        return Err(Error::Shape {
            what: "dataset features",
            expected: model.input_dim(),
            got: data.input_dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut fit_indices = Vec::with_capacity(data.num_classes());
    let mut calib_indices = Vec::new();
    for (class, mut idx) in data.indices_by_class().into_iter().enumerate() {
        let n = idx.len();
        let n_calib = ((n as f64 * cfg.calib_fraction).round() as usize).max(1);
        if n < n_calib + cfg.examples_per_class.max(1) {
            return Err(Error::invalid(format!(
                "class {:?} has {n} samples; need {} for calibration plus {} stored examples",
                data.label_names()[class],
                n_calib,
                cfg.examples_per_class.max(1)
            )));
        }
        idx.shuffle(&mut rng);
        calib_indices.extend_from_slice(&idx[..n_calib]);
        fit_indices.push(idx[n_calib..].to_vec());
    }

    let d = model.embedding_dim();
    let k = fit_indices.len();
    let mut prototypes = Vec::with_capacity(k);
    let mut within = DMatrix::zeros(d, d);
    let mut all = Vec::new();
    for rows in &fit_indices {
        let z = embed_rows(model, data, rows)?;
        let mut proto = DVector::zeros(d);
        for e in &z {
            proto += DVector::from_column_slice(e);
        }
        proto /= z.len() as f64;
        for e in &z {
            let diff = DVector::from_column_slice(e) - &proto;
            within.ger(1.0, &diff, &diff, 1.0);
        }
        prototypes.push(proto.iter().copied().collect::<Vec<_>>());
        all.extend(z);
    }
    let n_fit = all.len() as f64;
    within /= n_fit;
    let mut mean = DVector::zeros(d);
    for e in &all {
        mean += DVector::from_column_slice(e);
    }
    mean /= n_fit;
    let mut background = DMatrix::zeros(d, d);
    for e in &all {
        let diff = DVector::from_column_slice(e) - &mean;
        background.ger(1.0, &diff, &diff, 1.0);
    }
    background /= n_fit;

    let calib_z = embed_rows(model, data, &calib_indices)?;
    let calib_labels: Vec<usize> = calib_indices.iter().map(|&i| data.label(i)).collect();

    // Placeholder calibrator; replaced once the closest distances are known.
    let provisional = DistanceCalibrator::with_bandwidth(&[0.0], 1.0)?;
    let mut head = UqHead::from_parts(
        data.label_names().to_vec(),
        prototypes,
        regularize(within),
        mean.iter().copied().collect(),
        regularize(background),
        provisional,
        1.0,
    )?;
    let calib_distances = calib_z
        .iter()
        .map(|z| head.closest_class(z).map(|(_, dist)| dist))
        .collect::<Result<Vec<_>>>()?;
    head.calibrator = DistanceCalibrator::fit(&calib_distances)?;
    head.temperature = head.fit_temperature(&calib_z, &calib_labels);

    let store = TrainingExampleStore::sample(model, &head, data, &fit_indices, cfg.examples_per_class, cfg.seed)?;
    Ok(FittedHead {
        head,
        store,
        fit_indices,
    })
}

/// Embeds `x` and scores it.
pub fn predict(model: &EmbeddingModel, head: &UqHead, x: &[f64], payload: Payload) -> Result<Prediction> {
    head.predict_embedding(model.forward(x)?, payload)
}
