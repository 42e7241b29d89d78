use web_time::Instant;

use super::pca::pca2;
use super::{check_points, Method, Projection};
use crate::error::Result;
use crate::linalg::{distance_matrix, euclidean};

pub const MDS_MAX_ITER: usize = 300;
pub const MDS_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SmacofTrace {
    pub coords: Vec<[f64; 2]>,
    /// Raw stress of the initial configuration followed by one entry per
    /// Guttman update.
    pub stress_history: Vec<f64>,
}

fn raw_stress(target: &[Vec<f64>], coords: &[[f64; 2]]) -> f64 {
    let n = coords.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = target[i][j] - euclidean(&coords[i], &coords[j]);
            s += r * r;
        }
    }
    s
}

/// Metric MDS by stress majorization with unit weights, starting from `init`.
///
/// Stops when the relative stress decrease falls below `rel_tol` or after
/// `max_iter` updates.
pub fn smacof(target: &[Vec<f64>], init: &[[f64; 2]], max_iter: usize, rel_tol: f64) -> SmacofTrace {
    let n = init.len();
    let mut x = init.to_vec();
    let mut stress = raw_stress(target, &x);
    let mut history = vec![stress];
    for _ in 0..max_iter {
        if stress == 0.0 {
            break;
        }
        // Guttman transform: X <- B(X) X / n.
        let mut next = vec![[0.0; 2]; n];
        for i in 0..n {
            let mut acc = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dij = euclidean(&x[i], &x[j]);
                if dij > 0.0 {
                    let ratio = target[i][j] / dij;
                    acc[0] += ratio * (x[i][0] - x[j][0]);
                    acc[1] += ratio * (x[i][1] - x[j][1]);
                }
            }
            next[i] = [acc[0] / n as f64, acc[1] / n as f64];
        }
        let new_stress = raw_stress(target, &next);
        x = next;
        history.push(new_stress);
        let decrease = stress - new_stress;
        stress = new_stress;
        if decrease <= rel_tol * history[history.len() - 2] {
            break;
        }
    }
    SmacofTrace {
        coords: x,
        stress_history: history,
    }
}

/// Metric MDS initialized from the PCA solution.
pub fn mds2<P: AsRef<[f64]>>(points: &[P]) -> Result<Projection> {
    let start = Instant::now();
    check_points(points, 3)?;
    let target = distance_matrix(points);
    let trace = if target.iter().flatten().all(|&d| d == 0.0) {
        SmacofTrace {
            coords: vec![[0.0; 2]; points.len()],
            stress_history: vec![0.0],
        }
    } else {
        let init = pca2(points)?.coords;
        smacof(&target, &init, MDS_MAX_ITER, MDS_REL_TOL)
    };
    Ok(Projection {
        coords: trace.coords,
        method: Method::Mds,
        scree: [0.0; 5],
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
