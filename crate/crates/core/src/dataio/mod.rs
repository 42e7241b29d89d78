//! Dataset ingestion, hover payloads and model persistence.

mod bundle;
mod idx;
mod payload;
mod synthetic;
mod tabular;

pub use bundle::{load_bundle, save_bundle, ModelBundle, BUNDLE_FORMAT_VERSION, BUNDLE_MAGIC};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IdxImages, IMAGES_MAGIC, LABELS_MAGIC};
pub use payload::{image_data_uri, Payload};
pub use synthetic::gaussian_blobs;
pub use tabular::{load_tabular_json, parse_tabular_json};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class names of Fashion-MNIST in label order.
pub const FASHION_MNIST_LABELS: [&str; 10] = [
    "T-shirt/top",
    "Trouser",
    "Pullover",
    "Dress",
    "Coat",
    "Sandal",
    "Shirt",
    "Sneaker",
    "Bag",
    "Ankle boot",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Modality {
    Image { height: usize, width: usize },
    Tabular { field_names: Vec<String> },
}

impl Modality {
    pub fn input_dim(&self) -> usize {
        match self {
            Modality::Image { height, width } => height * width,
            Modality::Tabular { field_names } => field_names.len(),
        }
    }

    /// Hover payload for one sample: a PNG data URI for images, a JSON
    /// object keyed by field name for tabular rows.
    pub fn payload(&self, sample: &[f32]) -> Payload {
        match self {
            Modality::Image { height, width } => Payload {
                img_src: Some(image_data_uri(sample, *width, *height)),
                json_src: None,
            },
            Modality::Tabular { field_names } => {
                let obj: serde_json::Map<String, serde_json::Value> = field_names
                    .iter()
                    .zip(sample)
                    .map(|(k, &v)| (k.clone(), serde_json::json!(v as f64)))
                    .collect();
                Payload {
                    img_src: None,
                    json_src: Some(serde_json::Value::Object(obj).to_string()),
                }
            }
        }
    }
}

/// Labeled samples with every feature scaled into `[0, 1]`.
///
/// Samples are stored row-major as `f32` to keep the 60k-image training
/// split at under 200 MB.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<f32>,
    input_dim: usize,
    labels: Vec<usize>,
    label_names: Vec<String>,
    modality: Modality,
}

impl Dataset {
    pub fn new(
        samples: Vec<f32>,
        input_dim: usize,
        labels: Vec<usize>,
        label_names: Vec<String>,
        modality: Modality,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        if samples.len() != labels.len() * input_dim {
            return Err(Error::Shape {
                what: "dataset samples",
                expected: labels.len() * input_dim,
                got: samples.len(),
            });
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {bad}")));
        }
        if let Some(&max) = labels.iter().max() {
            if max >= label_names.len() {
                return Err(Error::invalid(format!(
                    "label id {max} has no name ({} names given)",
                    label_names.len()
                )));
            }
        }
        match &modality {
            Modality::Image { height, width } if height * width != input_dim => {
                return Err(Error::Shape {
                    what: "image modality",
                    expected: input_dim,
                    got: height * width,
                })
            }
            Modality::Tabular { field_names } if field_names.len() != input_dim => {
                return Err(Error::Shape {
                    what: "tabular field names",
                    expected: input_dim,
                    got: field_names.len(),
                })
            }
            _ => {}
        }
        Ok(Self {
            samples,
            input_dim,
            labels,
            label_names,
            modality,
        })
    }

    /// Builds a tabular dataset from `f64` rows, mostly for tests and demos.
    ///
    /// Values are stored as given (no rescaling).
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, label_names: Vec<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        let samples = rows.iter().flatten().map(|&v| v as f32).collect();
        let field_names = (0..dim).map(|i| format!("x{i}")).collect();
        Self::new(samples, dim, labels, label_names, Modality::Tabular { field_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn modality(&self) -> &Modality {
        &self.modality
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.samples[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn sample_f64(&self, i: usize) -> Vec<f64> {
        self.sample(i).iter().map(|&v| v as f64).collect()
    }

    /// Sample indices grouped by label id.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    pub fn with_label_names(mut self, names: Vec<String>) -> Result<Self> {
        if let Some(&max) = self.labels.iter().max() {
            if max >= names.len() {
                return Err(Error::invalid(format!(
                    "label id {max} has no name ({} names given)",
                    names.len()
                )));
            }
        }
        self.label_names = names;
        Ok(self)
    }

    /// Keeps the given rows, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut samples = Vec::with_capacity(indices.len() * self.input_dim);
        for &i in indices {
            samples.extend_from_slice(self.sample(i));
        }
        Dataset {
            samples,
            input_dim: self.input_dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
            modality: self.modality.clone(),
        }
    }

    /// First `per_class` rows of every class, keeping the original order.
    pub fn stratified_head(&self, per_class: usize) -> Dataset {
        let mut taken = vec![0usize; self.num_classes()];
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let l = self.labels[i];
                taken[l] += 1;
                taken[l] <= per_class
            })
            .collect();
        self.subset(&keep)
    }

    /// Min-max rescaling of every feature into `[0, 1]`.
    ///
    /// Data whose features already span exactly `[0, 1]` come back unchanged,
    /// so the operation is idempotent.
    pub fn rescaled_unit(&self) -> Dataset {
        let d = self.input_dim;
        let mut lo = vec![f32::INFINITY; d];
        let mut hi = vec![f32::NEG_INFINITY; d];
        for row in self.samples.chunks(d) {
            for (j, &v) in row.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let samples = self
            .samples
            .chunks(d)
            .flat_map(|row| {
                row.iter().enumerate().map(|(j, &v)| {
                    let span = hi[j] - lo[j];
                    if span > 0.0 {
                        ((v - lo[j]) / span).clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
            })
            .collect::<Vec<_>>();
        Dataset {
            samples,
            ..self.clone()
        }
    }

    /// Hover payload for row `i`: a PNG data URI for images, a JSON object
    /// of field values for tabular rows.
    pub fn payload(&self, i: usize) -> Payload {
        self.modality.payload(self.sample(i))
    }
}
