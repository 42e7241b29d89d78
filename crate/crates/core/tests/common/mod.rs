//! Brute-force reference implementations and fixtures shared by the
//! integration tests and the acceptance runner.

#![allow(dead_code)]

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatteruq_core::dataio::{gaussian_blobs, Dataset, ModelBundle};
use scatteruq_core::embednet::TrainConfig;
use scatteruq_core::uqhead::{HeadConfig, Prediction};

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// 1-based rank of `j` among the neighbours of `i`, counting every point
/// strictly closer plus equally close points with a smaller index.
fn rank(points: &[Vec<f64>], i: usize, j: usize) -> usize {
    let dij = dist(&points[i], &points[j]);
    1 + (0..points.len())
        .filter(|&l| l != i && l != j)
        .filter(|&l| {
            let dil = dist(&points[i], &points[l]);
            dil < dij || (dil == dij && l < j)
        })
        .count()
}

pub fn brute_trustworthiness(high: &[Vec<f64>], low: &[Vec<f64>], k: usize) -> f64 {
    let n = high.len();
    let mut penalty = 0.0;
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let in_low = rank(low, i, j) <= k;
            let r_high = rank(high, i, j);
            if in_low && r_high > k {
                penalty += (r_high - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

pub fn brute_continuity(high: &[Vec<f64>], low: &[Vec<f64>], k: usize) -> f64 {
    brute_trustworthiness(low, high, k)
}

pub fn brute_stress(high: &[Vec<f64>], low: &[Vec<f64>]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..high.len() {
        for j in 0..high.len() {
            if i != j {
                let d = dist(&high[i], &high[j]);
                num += (d - dist(&low[i], &low[j])).powi(2);
                den += d * d;
            }
        }
    }
    num / den
}

/// Mid-rank: count of smaller values plus half the ties (including itself).
fn mid_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_shepard(high: &[Vec<f64>], low: &[Vec<f64>]) -> f64 {
    let mut dh = Vec::new();
    let mut dl = Vec::new();
    for i in 0..high.len() {
        for j in 0..i {
            dh.push(dist(&high[i], &high[j]));
            dl.push(dist(&low[i], &low[j]));
        }
    }
    let (rh, rl) = (mid_ranks(&dh), mid_ranks(&dl));
    let m = rh.len() as f64;
    let mh = rh.iter().sum::<f64>() / m;
    let ml = rl.iter().sum::<f64>() / m;
    let cov: f64 = rh.iter().zip(&rl).map(|(a, b)| (a - mh) * (b - ml)).sum();
    let vh: f64 = rh.iter().map(|a| (a - mh).powi(2)).sum();
    let vl: f64 = rl.iter().map(|b| (b - ml).powi(2)).sum();
    cov / (vh * vl).sqrt()
}

/// Probability that a random positive outscores a random negative, ties
/// counted half.
pub fn brute_auroc(positives: &[f64], negatives: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in positives {
        for n in negatives {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (positives.len() * negatives.len()) as f64
}

/// Random field built from Gaussian bumps with its border forced to zero;
/// `values[j * n + i]`.
pub fn smooth_field(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(2..9))
        .map(|_| {
            (
                rng.random_range(0.15..0.85),
                rng.random_range(0.15..0.85),
                rng.random_range(0.03..0.15),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    let mut v = vec![0.0; n * n];
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let (x, y) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
            v[j * n + i] = bumps
                .iter()
                .map(|(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
                .sum();
        }
    }
    v
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra] = rb;
    }
}

/// Expected number of closed level curves of a field whose border lies
/// below `level`: connected super-level regions plus connected sub-level
/// regions minus one. Diagonal neighbours in a saddle cell are joined on the
/// side the cell-centre average falls on.
pub fn region_count(values: &[f64], n: usize, level: f64) -> usize {
    let inside: Vec<bool> = values.iter().map(|&v| v > level).collect();
    let mut parent: Vec<usize> = (0..n * n).collect();
    let id = |i: usize, j: usize| j * n + i;
    for j in 0..n {
        for i in 0..n {
            if i + 1 < n && inside[id(i, j)] == inside[id(i + 1, j)] {
                union(&mut parent, id(i, j), id(i + 1, j));
            }
            if j + 1 < n && inside[id(i, j)] == inside[id(i, j + 1)] {
                union(&mut parent, id(i, j), id(i, j + 1));
            }
        }
    }
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let (bl, br, tl, tr) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            let diag = inside[bl] == inside[tr] && inside[br] == inside[tl] && inside[bl] != inside[br];
            if diag {
                let centre = (values[bl] + values[br] + values[tl] + values[tr]) / 4.0 > level;
                if inside[bl] == centre {
                    union(&mut parent, bl, tr);
                } else {
                    union(&mut parent, br, tl);
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..n * n).map(|a| find(&mut parent, a)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len() - 1
}

pub fn blob_centers(k: usize, dim: usize, spacing: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| (0..dim).map(|d| if d == c % dim { spacing } else { 0.0 } + (c / dim) as f64 * spacing).collect())
        .collect()
}

/// Three-class tabular bundle with `m` stored examples per class.
pub fn small_bundle(m: usize, seed: u64) -> (ModelBundle, Dataset) {
    let data = gaussian_blobs(&blob_centers(3, 6, 3.0), 40, 0.5, seed).unwrap();
    let tc = TrainConfig {
        epochs: 5,
        episodes_per_epoch: 10,
        hidden_dims: vec![12],
        embedding_dim: 4,
        learning_rate: 1e-2,
        rng_seed: seed,
        ..TrainConfig::default()
    };
    let hc = HeadConfig {
        examples_per_class: m,
        seed,
        ..HeadConfig::default()
    };
    (ModelBundle::fit(&data, &tc, &hc).unwrap(), data)
}

/// Random prediction over `k` classes. Scores are sometimes snapped to a
/// coarse grid so slider boundary ties occur.
pub fn random_prediction(rng: &mut ChaCha8Rng, k: usize) -> Prediction {
    let peak = rng.random_range(0.0..6.0);
    let raw: Vec<f64> = (0..k).map(|_| (peak * rng.random::<f64>()).exp()).collect();
    let total: f64 = raw.iter().sum();
    let mut conf: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let mut outlier = rng.random::<f64>();
    if rng.random_bool(0.3) {
        outlier = (outlier * 20.0).round() / 20.0;
        conf.iter_mut().for_each(|c| *c = (*c * 20.0).round() / 20.0);
    }
    let class_confidence_scores: IndexMap<String, f64> =
        conf.iter().enumerate().map(|(i, &c)| (format!("c{i}"), c)).collect();
    let mut p = Prediction {
        class_confidence_scores,
        outlier_score: outlier,
        embedding: vec![0.0; 2],
        img_src: None,
        json_src: None,
        predicted_label: String::new(),
    };
    p.predicted_label = format!("c{}", p.predicted_class());
    p
}

pub fn random_threshold(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.3) {
        (rng.random::<f64>() * 20.0).round() / 20.0
    } else {
        rng.random::<f64>()
    }
}
