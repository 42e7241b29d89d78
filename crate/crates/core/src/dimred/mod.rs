//! Projection of embedding sets to two dimensions.

mod mds;
mod pca;
mod tsne;

pub use mds::{mds2, smacof, SmacofTrace, MDS_MAX_ITER, MDS_REL_TOL};
pub use pca::pca2;
pub use tsne::{conditional_affinities, default_perplexity, tsne2, tsne2_traced, TsneConfig, TsneTrace};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PCA")]
    Pca,
    #[serde(rename = "MDS")]
    Mds,
    #[serde(rename = "t-SNE")]
    Tsne,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "PCA",
            Method::Mds => "MDS",
            Method::Tsne => "t-SNE",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    pub method: Method,
    /// Five leading covariance eigenvalues (PCA only; zeros otherwise).
    pub scree: [f64; 5],
    pub elapsed_seconds: f64,
}

impl Projection {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinates as `Vec<f64>` rows, the shape the metrics take.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.coords.iter().map(|c| c.to_vec()).collect()
    }
}

/// Runs `method` with its default settings.
pub fn project<P: AsRef<[f64]>>(points: &[P], method: Method, seed: u64) -> Result<Projection> {
    match method {
        Method::Pca => pca2(points),
        Method::Mds => mds2(points),
        Method::Tsne => tsne2(points, &TsneConfig { seed, ..TsneConfig::default() }),
    }
}

fn check_points<P: AsRef<[f64]>>(points: &[P], min: usize) -> Result<usize> {
    if points.len() < min {
        return Err(Error::invalid(format!(
            "projection needs at least {min} points, got {}",
            points.len()
        )));
    }
    let d = points[0].as_ref().len();
    if d == 0 {
        return Err(Error::invalid("points have zero dimensions"));
    }
    for p in points {
        let p = p.as_ref();
        if p.len() != d {
            return Err(Error::Shape {
                what: "projection input",
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection input contains non-finite values"));
        }
    }
    Ok(d)
}
