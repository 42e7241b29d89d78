use nalgebra::{DMatrix, SymmetricEigen};
use web_time::Instant;

use super::{check_points, Method, Projection};
use crate::error::Result;
use crate::linalg::rows_to_matrix;

/// Projects centred points onto the two leading principal axes.
///
/// Each axis is oriented so that its largest-magnitude loading is positive.
pub fn pca2<P: AsRef<[f64]>>(points: &[P]) -> Result<Projection> {
    let start = Instant::now();
    let d = check_points(points, 3)?;
    let n = points.len();
    let mut x = rows_to_matrix(points);
    let mean = x.row_mean();
    for mut row in x.row_iter_mut() {
        row -= &mean;
    }
    let cov: DMatrix<f64> = x.transpose() * &x / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut axes = DMatrix::zeros(d, 2);
    for (slot, &idx) in order.iter().take(2).enumerate() {
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        let lead = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        axes.set_column(slot, &v);
    }
    let projected = &x * axes;

    let mut scree = [0.0; 5];
    for (s, &idx) in scree.iter_mut().zip(&order) {
        *s = eig.eigenvalues[idx].max(0.0);
    }
    let coords = projected.row_iter().map(|r| [r[0], r[1]]).collect();
    Ok(Projection {
        coords,
        method: Method::Pca,
        scree,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
