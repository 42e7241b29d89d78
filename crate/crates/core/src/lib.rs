//! Uncertainty-aware prototypical networks and the local projection plots
//! used to explain their predictions.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`embednet`] trains a small feedforward embedding network episodically.
//! 2. [`uqhead`] turns embeddings into class confidences (softmax over
//!    negative prototype distances) and a KDE-calibrated outlier score based
//!    on the relative Mahalanobis distance.
//! 3. [`plotengine`] routes every prediction through two user thresholds into
//!    one of three use cases and builds a local 2-D plot against the stored
//!    training examples of the one or two relevant classes.
//! 4. [`dimred`] and [`drmetrics`] supply the projections and their quality
//!    scores; [`experiment`] compares methods and local vs. global plots.

pub mod dataio;
pub mod dimred;
pub mod drmetrics;
pub mod embednet;
pub mod error;
pub mod experiment;
pub(crate) mod linalg;
pub mod plotengine;
pub mod uqhead;

pub use error::{BundleError, Error, IdxError, Result};
