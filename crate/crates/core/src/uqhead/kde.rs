use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{normal_cdf, silverman_bandwidth};

/// Gaussian KDE over in-distribution closest-prototype distances.
///
/// The CDF is the mean of the Gaussian CDFs centred on each calibration
/// distance, so it is available in closed form and is monotone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCalibrator {
    sorted: Vec<f64>,
    bandwidth: f64,
}

impl DistanceCalibrator {
    /// Fits with Silverman's rule. Samples without spread get a tiny
    /// bandwidth relative to their magnitude, making the CDF a near-step.
    pub fn fit(distances: &[f64]) -> Result<Self> {
        let h = silverman_bandwidth(distances);
        let scale = distances.iter().fold(1.0f64, |m, d| m.max(d.abs()));
        Self::with_bandwidth(distances, h.max(1e-9 * scale))
    }

    pub fn with_bandwidth(distances: &[f64], bandwidth: f64) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::invalid("calibration distances are empty"));
        }
        if distances.iter().any(|d| !d.is_finite()) {
            return Err(Error::Numerical("non-finite calibration distance".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let mut sorted = distances.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted, bandwidth })
    }

    pub fn distances(&self) -> &[f64] {
        &self.sorted
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn cdf(&self, distance: f64) -> f64 {
        let total: f64 = self
            .sorted
            .iter()
            .map(|c| normal_cdf((distance - c) / self.bandwidth))
            .sum();
        (total / self.sorted.len() as f64).clamp(0.0, 1.0)
    }
}
