use nalgebra::DMatrix;

use super::network::{EmbeddingModel, Gradients};
use crate::error::{Error, Result};

/// `softmax(-d / temperature)`, computed in log space with max-subtraction.
pub fn softmax_neg(distances: &[f64], temperature: f64) -> Vec<f64> {
    log_softmax_neg(distances, temperature)
        .into_iter()
        .map(f64::exp)
        .collect()
}

pub fn log_softmax_neg(distances: &[f64], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = distances.iter().map(|d| -d / temperature).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.into_iter().map(|l| l - lse).collect()
}

/// Support/query split for one training step.
///
/// Disjointness of support and query is the sampler's responsibility; the
/// constructor checks counts only.
#[derive(Debug, Clone)]
pub struct Episode {
    class_ids: Vec<usize>,
    support: Vec<Vec<Vec<f64>>>,
    query: Vec<Vec<Vec<f64>>>,
}

impl Episode {
    pub fn new(
        class_ids: Vec<usize>,
        support: Vec<Vec<Vec<f64>>>,
        query: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if class_ids.is_empty() {
            return Err(Error::invalid("episode has no classes"));
        }
        if support.len() != class_ids.len() || query.len() != class_ids.len() {
            return Err(Error::invalid("support/query lists must match the class list"));
        }
        let n_support = support[0].len();
        let n_query = query[0].len();
        if n_support == 0 {
            return Err(Error::invalid(format!(
                "class {} has no support samples",
                class_ids[0]
            )));
        }
        if n_query == 0 {
            return Err(Error::invalid("episode has no query samples"));
        }
        for (k, (s, q)) in support.iter().zip(&query).enumerate() {
            if s.len() != n_support || q.len() != n_query {
                return Err(Error::invalid(format!(
                    "class {} has {} support / {} query samples, expected {n_support} / {n_query}",
                    class_ids[k],
                    s.len(),
                    q.len()
                )));
            }
        }
        Ok(Self {
            class_ids,
            support,
            query,
        })
    }

    pub fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    /// Support samples grouped by class, in `class_ids` order.
    pub fn support(&self) -> &[Vec<Vec<f64>>] {
        &self.support
    }

    pub fn query(&self) -> &[Vec<Vec<f64>>] {
        &self.query
    }

    pub fn n_support(&self) -> usize {
        self.support[0].len()
    }

    pub fn n_query(&self) -> usize {
        self.query[0].len()
    }
}

/// Mean negative log-probability of each query's true class, where class
/// probabilities are a softmax over negative squared Euclidean distances to
/// the prototypes (means of the embedded support samples), together with the
/// exact gradient of that loss.
pub fn episode_loss(model: &EmbeddingModel, episode: &Episode) -> Result<(f64, Gradients)> {
    let dim = model.input_dim();
    let k = episode.class_ids.len();
    let ns = episode.n_support();
    let nq = episode.n_query();
    let n_support_total = k * ns;
    let n_total = n_support_total + k * nq;

    let mut x = DMatrix::zeros(dim, n_total);
    let columns = episode
        .support
        .iter()
        .flatten()
        .chain(episode.query.iter().flatten());
    for (c, sample) in columns.enumerate() {
        if sample.len() != dim {
            return Err(Error::Shape {
                what: "episode sample",
                expected: dim,
                got: sample.len(),
            });
        }
        x.column_mut(c).copy_from_slice(sample);
    }

    let (z, cache) = model.forward_cached(&x);
    let d = z.nrows();

    let mut protos = DMatrix::zeros(d, k);
    for class in 0..k {
        for s in 0..ns {
            let col = z.column(class * ns + s);
            let mut p = protos.column_mut(class);
            p += col;
        }
    }
    protos /= ns as f64;

    let n_queries = (k * nq) as f64;
    let mut grad_z = DMatrix::zeros(d, n_total);
    let mut grad_protos = DMatrix::zeros(d, k);
    let mut loss = 0.0;
    for true_class in 0..k {
        for qi in 0..nq {
            let col = n_support_total + true_class * nq + qi;
            let q = z.column(col);
            let dists: Vec<f64> = (0..k)
                .map(|c| (q - protos.column(c)).norm_squared())
                .collect();
            let logp = log_softmax_neg(&dists, 1.0);
            loss -= logp[true_class];
            for c in 0..k {
                // dL/dd_c = (1[c == y] - p_c) / Q
                let coeff = ((c == true_class) as u8 as f64 - logp[c].exp()) / n_queries;
                if coeff == 0.0 {
                    continue;
                }
                let diff = q - protos.column(c);
                let mut gq = grad_z.column_mut(col);
                gq.axpy(2.0 * coeff, &diff, 1.0);
                let mut gp = grad_protos.column_mut(c);
                gp.axpy(-2.0 * coeff, &diff, 1.0);
            }
        }
    }
    loss /= n_queries;

    for class in 0..k {
        let gp = grad_protos.column(class) / ns as f64;
        for s in 0..ns {
            grad_z.column_mut(class * ns + s).copy_from(&gp);
        }
    }

    Ok((loss, model.backward(&cache, grad_z)))
}
