use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Activation, EmbeddingModel, Layer};
use super::protonet::{episode_loss, Episode};
use crate::dataio::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub n_support: usize,
    pub n_query: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub rng_seed: u64,
    pub hidden_dims: Vec<usize>,
    pub embedding_dim: usize,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            episodes_per_epoch: 100,
            n_support: 5,
            n_query: 5,
            learning_rate: 1e-3,
            momentum: 0.9,
            rng_seed: 0,
            hidden_dims: vec![256, 128],
            embedding_dim: 32,
            activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_epoch == 0 || self.n_support == 0 || self.n_query == 0 {
            return Err(Error::invalid(
                "episodes_per_epoch, n_support and n_query must be at least 1",
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: EmbeddingModel,
    /// Mean episode loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Episodic SGD with momentum. Every class appears in every episode.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let by_class: Vec<Vec<usize>> = data
        .indices_by_class()
        .into_iter()
        .filter(|g| !g.is_empty())
        .collect();
    if by_class.is_empty() {
        return Err(Error::invalid("training data is empty"));
    }
    let needed = cfg.n_support + cfg.n_query;
    for g in &by_class {
        if g.len() < needed {
            return Err(Error::invalid(format!(
                "class {} has {} samples, episodes need {needed}",
                data.label(g[0]),
                g.len(),
            )));
        }
    }

    let mut model = EmbeddingModel::init(
        data.input_dim(),
        &cfg.hidden_dims,
        cfg.embedding_dim,
        cfg.activation,
        cfg.rng_seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut velocity: Vec<Layer> = model
        .layers()
        .iter()
        .map(|l| Layer {
            weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
            bias: DVector::zeros(l.bias.len()),
        })
        .collect();

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut pools = by_class.clone();
    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..cfg.episodes_per_epoch {
            let episode = sample_episode(data, &mut pools, cfg, &mut rng)?;
            let (loss, grads) = episode_loss(&model, &episode)?;
            total += loss;
            for (v, g) in velocity.iter_mut().zip(&grads.layers) {
                v.weights *= cfg.momentum;
                v.weights -= &g.weights * cfg.learning_rate;
                v.bias *= cfg.momentum;
                v.bias.axpy(-cfg.learning_rate, &g.bias, 1.0);
            }
            model.apply_update(&velocity);
        }
        epoch_losses.push(total / cfg.episodes_per_epoch as f64);
    }
    Ok(TrainReport {
        model,
        epoch_losses,
    })
}

fn sample_episode(
    data: &Dataset,
    pools: &mut [Vec<usize>],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Episode> {
    let mut class_ids = Vec::with_capacity(pools.len());
    let mut support = Vec::with_capacity(pools.len());
    let mut query = Vec::with_capacity(pools.len());
    for pool in pools.iter_mut() {
        // Distinct indices, so support and query never share a sample.
        let (chosen, _) = pool.partial_shuffle(rng, cfg.n_support + cfg.n_query);
        class_ids.push(data.label(chosen[0]));
        support.push(chosen[..cfg.n_support].iter().map(|&i| data.sample_f64(i)).collect());
        query.push(chosen[cfg.n_support..].iter().map(|&i| data.sample_f64(i)).collect());
    }
    Episode::new(class_ids, support, query)
}
