//! Exact t-SNE.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use web_time::Instant;

use super::{check_points, Method, Projection};
use crate::error::{Error, Result};
use crate::linalg::squared_euclidean;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    /// `None` picks `min(30, floor((N-1)/3))`.
    pub perplexity: Option<f64>,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    /// `None` picks `max(50, N/12)`.
    pub learning_rate: Option<f64>,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: None,
            iterations: 500,
            exaggeration: 12.0,
            exaggeration_iterations: 100,
            learning_rate: None,
            seed: 0,
        }
    }
}

pub fn default_perplexity(n: usize) -> f64 {
    (((n.saturating_sub(1)) / 3) as f64).min(30.0)
}

#[derive(Debug, Clone)]
pub struct TsneTrace {
    pub projection: Projection,
    /// KL(P || Q) after every iteration, measured against the
    /// un-exaggerated affinities. Non-increasing once exaggeration ends:
    /// steps that would raise it are rejected and the momentum restarted
    /// with half the step size.
    pub kl_history: Vec<f64>,
}

const ENTROPY_TOL: f64 = 1e-6;
const BISECTION_STEPS: usize = 200;

/// Row-conditional Gaussian affinities, each row's precision found by
/// bisection so that its entropy (nats) equals `ln(perplexity)`.
///
/// Returns the N×N matrix (zero diagonal) and the per-row precisions.
pub fn conditional_affinities(sq_dist: &[Vec<f64>], perplexity: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = sq_dist.len();
    let target = perplexity.ln();
    let mut p = vec![vec![0.0; n]; n];
    let mut betas = vec![1.0; n];
    for i in 0..n {
        let row = &sq_dist[i];
        let dmin = (0..n)
            .filter(|&j| j != i)
            .map(|j| row[j])
            .fold(f64::INFINITY, f64::min);
        let spread = (0..n).filter(|&j| j != i).map(|j| row[j] - dmin).fold(0.0, f64::max);
        let mut beta = if spread > 0.0 { 1.0 / spread } else { 1.0 };
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        for _ in 0..BISECTION_STEPS {
            let (h, _) = row_entropy(row, i, dmin, beta, &mut p[i]);
            let diff = h - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        row_entropy(row, i, dmin, beta, &mut p[i]);
        betas[i] = beta;
    }
    (p, betas)
}

/// Fills `out` with the normalized row and returns (entropy, normalizer).
fn row_entropy(row: &[f64], i: usize, dmin: f64, beta: f64, out: &mut [f64]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        if j == i {
            *o = 0.0;
            continue;
        }
        let shifted = row[j] - dmin;
        let v = (-beta * shifted).exp();
        *o = v;
        sum += v;
        weighted += shifted * v;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    (sum.ln() + beta * weighted / sum, sum)
}

pub fn tsne2<P: AsRef<[f64]>>(points: &[P], cfg: &TsneConfig) -> Result<Projection> {
    tsne2_traced(points, cfg).map(|t| t.projection)
}

pub fn tsne2_traced<P: AsRef<[f64]>>(points: &[P], cfg: &TsneConfig) -> Result<TsneTrace> {
    let start = Instant::now();
    check_points(points, 5)?;
    let n = points.len();
    let perplexity = cfg.perplexity.unwrap_or_else(|| default_perplexity(n));
    if !(perplexity > 0.0) || 3.0 * perplexity > (n - 1) as f64 {
        return Err(Error::invalid(format!(
            "perplexity {perplexity} is infeasible for {n} points (need 0 < perplexity <= (N-1)/3)"
        )));
    }
    let lr = cfg.learning_rate.unwrap_or_else(|| (n as f64 / 12.0).max(50.0));

    let sq: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| squared_euclidean(points[i].as_ref(), points[j].as_ref())).collect())
        .collect();
    let (cond, _) = conditional_affinities(&sq, perplexity);
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i][j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_history = Vec::with_capacity(cfg.iterations);
    let mut num = vec![vec![0.0; n]; n];

    let mut step = lr;
    let mut kl = kl_divergence(&p, &y);
    for iter in 0..cfg.iterations {
        let final_phase = iter >= cfg.exaggeration_iterations;
        let exaggerate = if final_phase { 1.0 } else { cfg.exaggeration };
        let momentum = if iter < 250 { 0.5 } else { 0.8 };

        let mut z = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 1.0 / (1.0 + squared_euclidean(&y[i], &y[j]));
                num[i][j] = v;
                num[j][i] = v;
                z += 2.0 * v;
            }
        }
        let mut next_update = update.clone();
        let mut next_gains = gains.clone();
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mult = (exaggerate * p[i][j] - num[i][j] / z) * num[i][j];
                g[0] += 4.0 * mult * (y[i][0] - y[j][0]);
                g[1] += 4.0 * mult * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                next_gains[i][d] = if (g[d] > 0.0) != (update[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(0.01)
                };
                next_update[i][d] = momentum * update[i][d] - step * next_gains[i][d] * g[d];
            }
        }
        let mut next_y = y.clone();
        for (yi, ui) in next_y.iter_mut().zip(&next_update) {
            yi[0] += ui[0];
            yi[1] += ui[1];
        }
        let mean = next_y.iter().fold([0.0; 2], |a, v| [a[0] + v[0], a[1] + v[1]]);
        for yi in &mut next_y {
            yi[0] -= mean[0] / n as f64;
            yi[1] -= mean[1] / n as f64;
        }
        let next_kl = kl_divergence(&p, &next_y);
        if final_phase && next_kl > kl {
            // Adaptive restart: drop the step, clear momentum and gains.
            update.iter_mut().for_each(|u| *u = [0.0; 2]);
            gains.iter_mut().for_each(|g| *g = [1.0; 2]);
            step *= 0.5;
        } else {
            y = next_y;
            update = next_update;
            gains = next_gains;
            kl = next_kl;
        }
        kl_history.push(kl);
    }

    if y.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(Error::Numerical("t-SNE diverged".into()));
    }
    Ok(TsneTrace {
        projection: Projection {
            coords: y,
            method: Method::Tsne,
            scree: [0.0; 5],
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
        kl_history,
    })
}

fn kl_divergence(p: &[Vec<f64>], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            z += 2.0 / (1.0 + squared_euclidean(&y[i], &y[j]));
        }
    }
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let q = (1.0 / (1.0 + squared_euclidean(&y[i], &y[j])) / z).max(1e-12);
                kl += p[i][j] * (p[i][j] / q).ln();
            }
        }
    }
    kl
}
