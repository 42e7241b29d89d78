use std::fs;
use std::path::Path;

use bincode::Options;
use serde::{Deserialize, Serialize};

use super::{Dataset, Modality, Payload};
use crate::embednet::{train, EmbeddingModel, TrainConfig};
use crate::error::{BundleError, Error, Result};
use crate::uqhead::{fit_head, predict, HeadConfig, Prediction, TrainingExampleStore, UqHead};

pub const BUNDLE_MAGIC: &[u8; 8] = b"SCUQBNDL";
pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

/// Everything needed to serve predictions and local plots. The configs
/// record the seeds the model, head and store were built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub model: EmbeddingModel,
    pub head: UqHead,
    pub store: TrainingExampleStore,
    pub train_config: TrainConfig,
    pub head_config: HeadConfig,
    pub modality: Modality,
}

fn codec() -> impl Options {
    bincode::DefaultOptions::new()
}

impl ModelBundle {
    pub fn new(
        model: EmbeddingModel,
        head: UqHead,
        store: TrainingExampleStore,
        train_config: TrainConfig,
        head_config: HeadConfig,
        modality: Modality,
    ) -> Result<Self> {
        let bundle = Self {
            model,
            head,
            store,
            train_config,
            head_config,
            modality,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Trains the embedding, fits the head and samples the example store.
    pub fn fit(data: &Dataset, train_config: &TrainConfig, head_config: &HeadConfig) -> Result<Self> {
        let model = train(data, train_config)?.model;
        let fitted = fit_head(&model, data, head_config)?;
        Self::new(
            model,
            fitted.head,
            fitted.store,
            train_config.clone(),
            head_config.clone(),
            data.modality().clone(),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.model.embedding_dim() != self.head.embedding_dim() {
            return Err(Error::Shape {
                what: "head embedding dimension",
                expected: self.model.embedding_dim(),
                got: self.head.embedding_dim(),
            });
        }
        if self.store.classes().len() != self.head.num_classes() {
            return Err(Error::Shape {
                what: "stored example classes",
                expected: self.head.num_classes(),
                got: self.store.classes().len(),
            });
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    pub fn labels(&self) -> &[String] {
        self.head.labels()
    }

    pub fn predict(&self, x: &[f64], payload: Payload) -> Result<Prediction> {
        predict(&self.model, &self.head, x, payload)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body = codec()
            .serialize(self)
            .map_err(|e| BundleError::Corrupt(e.to_string()))?;
        let mut out = Vec::with_capacity(HEADER_LEN + body.len());
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&BUNDLE_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            if BUNDLE_MAGIC.starts_with(bytes) {
                return Err(BundleError::Corrupt(format!("file is {} bytes, header needs {HEADER_LEN}", bytes.len())).into());
            }
            return Err(BundleError::BadMagic.into());
        }
        if &bytes[..8] != BUNDLE_MAGIC {
            return Err(BundleError::BadMagic.into());
        }
        let found = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes"));
        if found != BUNDLE_FORMAT_VERSION {
            return Err(BundleError::VersionMismatch {
                found,
                expected: BUNDLE_FORMAT_VERSION,
            }
            .into());
        }
        let bundle: Self = codec()
            .deserialize(&bytes[HEADER_LEN..])
            .map_err(|e| BundleError::Corrupt(e.to_string()))?;
        bundle
            .validate()
            .map_err(|e| BundleError::Corrupt(e.to_string()))?;
        Ok(bundle)
    }
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, bundle.to_bytes()?)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    ModelBundle::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::gaussian_blobs;

    fn small_bundle() -> (ModelBundle, Dataset) {
        let centers = vec![vec![0.0, 0.0, 0.0], vec![3.0, 0.0, 1.0], vec![0.0, 3.0, -1.0]];
        let data = gaussian_blobs(&centers, 40, 0.4, 1).unwrap();
        let tc = TrainConfig {
            epochs: 3,
            episodes_per_epoch: 5,
            hidden_dims: vec![6],
            embedding_dim: 3,
            ..TrainConfig::default()
        };
        (ModelBundle::fit(&data, &tc, &HeadConfig::default()).unwrap(), data)
    }

    #[test]
    fn round_trip_is_exact() {
        let (b, data) = small_bundle();
        let back = ModelBundle::from_bytes(&b.to_bytes().unwrap()).unwrap();
        assert_eq!(back, b);
        for i in 0..data.len() {
            let x = data.sample_f64(i);
            let p = b.predict(&x, Payload::default()).unwrap();
            let q = back.predict(&x, Payload::default()).unwrap();
            assert_eq!(p, q);
        }
    }

    #[test]
    fn header_errors() {
        let (b, _) = small_bundle();
        let bytes = b.to_bytes().unwrap();
        let mut wrong_version = bytes.clone();
        wrong_version[8..12].copy_from_slice(&7u32.to_le_bytes());
        let err = ModelBundle::from_bytes(&wrong_version).unwrap_err();
        assert!(matches!(err, Error::Bundle(BundleError::VersionMismatch { found: 7, expected: 1 })));
        let msg = err.to_string();
        assert!(msg.contains('7') && msg.contains('1'));
        assert!(matches!(
            ModelBundle::from_bytes(b"NOTABNDL\x01\0\0\0"),
            Err(Error::Bundle(BundleError::BadMagic))
        ));
        for cut in [0, 5, 12, bytes.len() / 2, bytes.len() - 1] {
            assert!(ModelBundle::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn file_round_trip() {
        let (b, _) = small_bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bundle");
        save_bundle(&b, &path).unwrap();
        assert_eq!(load_bundle(&path).unwrap(), b);
        assert!(matches!(load_bundle(dir.path().join("missing")), Err(Error::Io(_))));
    }
}
