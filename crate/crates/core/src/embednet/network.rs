use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Softplus,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Softplus => {
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation value.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Softplus => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => 1.0,
        }
    }
}

/// One affine map, `weights` is out×in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Multilayer perceptron: hidden layers use their activation, the last
/// layer is linear and produces the embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    layers: Vec<Layer>,
    activations: Vec<Activation>,
}

/// Parameter gradients, one entry per layer with the layer's shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    fn zeros_like(model: &EmbeddingModel) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect()
}

/// Per-layer inputs and pre-activations kept for the backward pass.
pub(crate) struct ForwardCache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
}

impl EmbeddingModel {
    /// `activations[i]` applies after `layers[i]`; there is one fewer
    /// activation than layers.
    pub fn new(layers: Vec<Layer>, activations: Vec<Activation>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("model needs at least one layer"));
        }
        if activations.len() + 1 != layers.len() {
            return Err(Error::Shape {
                what: "activation count",
                expected: layers.len() - 1,
                got: activations.len(),
            });
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.nrows() {
                return Err(Error::Shape {
                    what: "layer bias",
                    expected: l.weights.nrows(),
                    got: l.bias.len(),
                });
            }
            if let Some(next) = layers.get(i + 1) {
                if next.weights.ncols() != l.weights.nrows() {
                    return Err(Error::Shape {
                        what: "consecutive layers",
                        expected: l.weights.nrows(),
                        got: next.weights.ncols(),
                    });
                }
            }
        }
        Ok(Self { layers, activations })
    }

    /// Seeded uniform fan-in initialization: weights drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn init(
        input_dim: usize,
        hidden: &[usize],
        embedding_dim: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || embedding_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(embedding_dim);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-bound..bound)),
                    bias: DVector::zeros(w[1]),
                }
            })
            .collect();
        Self::new(layers, vec![activation; hidden.len()])
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.nrows()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All weights and biases, layer by layer (column-major weights, then bias).
    pub fn parameters(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.num_parameters() {
            return Err(Error::Shape {
                what: "parameter vector",
                expected: self.num_parameters(),
                got: params.len(),
            });
        }
        let mut out = self.clone();
        let mut it = params.iter().copied();
        for l in &mut out.layers {
            for w in l.weights.iter_mut() {
                *w = it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = it.next().unwrap();
            }
        }
        Ok(out)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                what: "model input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model input contains non-finite values"));
        }
        let mut h = DVector::from_column_slice(x);
        for (i, l) in self.layers.iter().enumerate() {
            h = &l.weights * h + &l.bias;
            if let Some(act) = self.activations.get(i) {
                h.apply(|v| *v = act.apply(*v));
            }
        }
        Ok(h.iter().copied().collect())
    }

    /// Embeds every column of `x` (input_dim × n), returning D × n.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(Error::Shape {
                what: "model input",
                expected: self.input_dim(),
                got: x.nrows(),
            });
        }
        Ok(self.forward_cached(x).0)
    }

    pub(crate) fn forward_cached(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, ForwardCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.weights * &h;
            for mut col in z.column_iter_mut() {
                col += &l.bias;
            }
            inputs.push(h);
            h = match self.activations.get(i) {
                Some(act) => z.map(|v| act.apply(v)),
                None => z.clone(),
            };
            pre.push(z);
        }
        (h, ForwardCache { inputs, pre })
    }

    /// Backpropagates `grad_out` (D × n, derivative of a scalar loss with
    /// respect to the batch output) to parameter gradients.
    pub(crate) fn backward(&self, cache: &ForwardCache, grad_out: DMatrix<f64>) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let mut delta = grad_out;
        for i in (0..self.layers.len()).rev() {
            if let Some(act) = self.activations.get(i) {
                delta.zip_apply(&cache.pre[i], |d, z| *d *= act.derivative(z));
            }
            grads.layers[i].weights = &delta * cache.inputs[i].transpose();
            grads.layers[i].bias = delta.column_sum();
            if i > 0 {
                delta = self.layers[i].weights.transpose() * &delta;
            }
        }
        grads
    }

    pub(crate) fn apply_update(&mut self, velocity: &[Layer]) {
        for (l, v) in self.layers.iter_mut().zip(velocity) {
            l.weights += &v.weights;
            l.bias += &v.bias;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_maps_to_zero() {
        let mut m = EmbeddingModel::init(3, &[4], 2, Activation::Tanh, 1).unwrap();
        m = m.with_parameters(&vec![0.0; m.num_parameters()]).unwrap();
        assert_eq!(m.forward(&[0.3, -7.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let m = EmbeddingModel::new(
            vec![Layer {
                weights: DMatrix::identity(2, 2),
                bias: DVector::zeros(2),
            }],
            vec![],
        )
        .unwrap();
        assert_eq!(m.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn seeded_2_4_2_matches_hand_computed_affine_maps() {
        let m = EmbeddingModel::init(2, &[4], 2, Activation::Tanh, 42).unwrap();
        let x = [0.5, -0.5];
        let (w1, b1) = (&m.layers()[0].weights, &m.layers()[0].bias);
        let (w2, b2) = (&m.layers()[1].weights, &m.layers()[1].bias);
        let mut hidden = [0.0; 4];
        for (r, h) in hidden.iter_mut().enumerate() {
            *h = (w1[(r, 0)] * x[0] + w1[(r, 1)] * x[1] + b1[r]).tanh();
        }
        let mut expected = [0.0; 2];
        for (r, e) in expected.iter_mut().enumerate() {
            *e = b2[r] + (0..4).map(|c| w2[(r, c)] * hidden[c]).sum::<f64>();
        }
        let got = m.forward(&x).unwrap();
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_forward_matches_single() {
        let m = EmbeddingModel::init(3, &[5, 4], 2, Activation::Softplus, 3).unwrap();
        let xs = DMatrix::from_fn(3, 4, |r, c| (r as f64 - c as f64) * 0.3);
        let batch = m.forward_batch(&xs).unwrap();
        for c in 0..4 {
            let single = m.forward(xs.column(c).as_slice()).unwrap();
            for r in 0..2 {
                assert!((batch[(r, c)] - single[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let m = EmbeddingModel::init(3, &[4], 2, Activation::Tanh, 0).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape { .. })));
        let bad = EmbeddingModel::new(
            vec![
                Layer { weights: DMatrix::zeros(3, 2), bias: DVector::zeros(3) },
                Layer { weights: DMatrix::zeros(2, 4), bias: DVector::zeros(2) },
            ],
            vec![Activation::Tanh],
        );
        assert!(matches!(bad, Err(Error::Shape { .. })));
    }
}
