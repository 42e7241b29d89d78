use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::head::{embed_rows, UqHead};
use super::prediction::Prediction;
use crate::dataio::{Dataset, Payload};
use crate::embednet::EmbeddingModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredExample {
    pub class_id: usize,
    pub is_prototype: bool,
    /// Row of the dataset the example was drawn from (`None` for prototypes).
    pub source_index: Option<usize>,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassExamples {
    pub class_id: usize,
    pub examples: Vec<StoredExample>,
    pub prototype: StoredExample,
}

impl ClassExamples {
    /// Examples followed by the prototype.
    pub fn points(&self) -> impl Iterator<Item = &StoredExample> {
        self.examples.iter().chain(std::iter::once(&self.prototype))
    }
}

/// The fixed set of training examples shown next to test samples: `m`
/// examples plus the prototype for every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExampleStore {
    examples_per_class: usize,
    classes: Vec<ClassExamples>,
}

impl TrainingExampleStore {
    /// Draws `m` examples per class without replacement from `candidates`
    /// (per-class dataset row indices) and scores them with `head`.
    pub fn sample(
        model: &EmbeddingModel,
        head: &UqHead,
        data: &Dataset,
        candidates: &[Vec<usize>],
        m: usize,
        seed: u64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("examples_per_class must be at least 1"));
        }
        if candidates.len() != head.num_classes() {
            return Err(Error::invalid(format!(
                "{} candidate groups for {} classes",
                candidates.len(),
                head.num_classes()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f5_704e);
        let mut classes = Vec::with_capacity(candidates.len());
        for (class_id, pool) in candidates.iter().enumerate() {
            if pool.len() < m {
                return Err(Error::invalid(format!(
                    "class {:?} has {} candidates, need {m}",
                    head.labels()[class_id],
                    pool.len()
                )));
            }
            let rows: Vec<usize> = pool.choose_multiple(&mut rng, m).copied().collect();
            let embeddings = embed_rows(model, data, &rows)?;
            let examples = rows
                .iter()
                .zip(embeddings)
                .map(|(&row, z)| {
                    Ok(StoredExample {
                        class_id,
                        is_prototype: false,
                        source_index: Some(row),
                        prediction: head.predict_embedding(z, data.payload(row))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let label = &head.labels()[class_id];
            let prototype = StoredExample {
                class_id,
                is_prototype: true,
                source_index: None,
                prediction: head.predict_embedding(
                    head.prototypes()[class_id].clone(),
                    Payload {
                        img_src: None,
                        json_src: Some(serde_json::json!({ "prototype": label }).to_string()),
                    },
                )?,
            };
            classes.push(ClassExamples {
                class_id,
                examples,
                prototype,
            });
        }
        Ok(Self {
            examples_per_class: m,
            classes,
        })
    }

    /// Samples from every row of `data`.
    pub fn sample_all(model: &EmbeddingModel, head: &UqHead, data: &Dataset, m: usize, seed: u64) -> Result<Self> {
        Self::sample(model, head, data, &data.indices_by_class(), m, seed)
    }

    pub fn examples_per_class(&self) -> usize {
        self.examples_per_class
    }

    pub fn classes(&self) -> &[ClassExamples] {
        &self.classes
    }

    pub fn class(&self, class_id: usize) -> Option<&ClassExamples> {
        self.classes.get(class_id)
    }

    /// Every stored point, class by class, prototypes last within a class.
    pub fn all_points(&self) -> impl Iterator<Item = &StoredExample> {
        self.classes.iter().flat_map(ClassExamples::points)
    }
}
