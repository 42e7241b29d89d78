use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::error::{Error, Result};

/// Isotropic Gaussian clusters, `per_class` samples around each centre,
/// labelled `c0, c1, ...` in centre order. Values are not rescaled.
pub fn gaussian_blobs(centers: &[Vec<f64>], per_class: usize, sd: f64, seed: u64) -> Result<Dataset> {
    if centers.is_empty() || per_class == 0 {
        return Err(Error::invalid("need at least one centre and one sample per class"));
    }
    if !(sd.is_finite() && sd >= 0.0) {
        return Err(Error::invalid(format!("spread must be finite and non-negative, got {sd}")));
    }
    let noise = Normal::new(0.0, sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(centers.len() * per_class);
    let mut labels = Vec::with_capacity(centers.len() * per_class);
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(c.iter().map(|v| v + noise.sample(&mut rng)).collect());
            labels.push(label);
        }
    }
    let names = (0..centers.len()).map(|i| format!("c{i}")).collect();
    Dataset::from_rows(&rows, labels, names)
}
