//! Feedforward embedding network trained as a prototypical network.

mod network;
mod protonet;
mod train;

pub use network::{Activation, EmbeddingModel, Gradients, Layer};
pub use protonet::{episode_loss, log_softmax_neg, softmax_neg, Episode};
pub use train::{train, TrainConfig, TrainReport};
