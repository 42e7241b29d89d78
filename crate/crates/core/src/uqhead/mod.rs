//! Confidence and outlier scoring on top of a trained embedding model.

mod head;
mod kde;
mod prediction;
mod store;

pub use head::{fit_head, predict, FittedHead, HeadConfig, UqHead};
pub(crate) use head::embed_rows;
pub use kde::DistanceCalibrator;
pub use prediction::Prediction;
pub use store::{ClassExamples, StoredExample, TrainingExampleStore};
