//! Projection quality: trustworthiness, continuity, normalized stress and
//! Shepard goodness of fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::distance_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DRQuality {
    pub trustworthiness: f64,
    pub continuity: f64,
    pub normalized_stress: f64,
    pub shepard_goodness: f64,
    pub k_neighbors: usize,
}

/// `max(1, min(7, floor((N-1)/3)))`.
pub fn default_k(n: usize) -> usize {
    (n.saturating_sub(1) / 3).clamp(1, 7)
}

impl DRQuality {
    pub fn compute<P: AsRef<[f64]>, Q: AsRef<[f64]>>(high: &[P], low: &[Q]) -> Result<Self> {
        Self::compute_with_k(high, low, default_k(high.len()))
    }

    pub fn compute_with_k<P: AsRef<[f64]>, Q: AsRef<[f64]>>(high: &[P], low: &[Q], k: usize) -> Result<Self> {
        check_pair(high.len(), low.len())?;
        let dh = distance_matrix(high);
        let dl = distance_matrix(low);
        check_k(high.len(), k)?;
        Ok(Self {
            trustworthiness: rank_penalty(&dh, &dl, k),
            continuity: rank_penalty(&dl, &dh, k),
            normalized_stress: stress_from(&dh, &dl)?,
            shepard_goodness: spearman(&condensed(&dh), &condensed(&dl))?,
            k_neighbors: k,
        })
    }
}

fn check_pair(n_high: usize, n_low: usize) -> Result<()> {
    if n_high != n_low {
        return Err(Error::Shape {
            what: "projection point count",
            expected: n_high,
            got: n_low,
        });
    }
    Ok(())
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || 2 * k >= n.saturating_sub(1) {
        return Err(Error::invalid(format!(
            "k = {k} is out of range for {n} points (need 1 <= k < (N-1)/2)"
        )));
    }
    Ok(())
}

/// Neighbour order of `i` under `d`, nearest first, ties by index.
fn neighbour_order(d: &[Vec<f64>], i: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.len()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| d[i][a].total_cmp(&d[i][b]).then(a.cmp(&b)));
    order
}

/// Trustworthiness when `reference` is the original space and `candidate`
/// the projection; swapping the arguments gives continuity.
fn rank_penalty(reference: &[Vec<f64>], candidate: &[Vec<f64>], k: usize) -> f64 {
    let n = reference.len();
    let mut rank = vec![0usize; n];
    let mut total = 0.0;
    for i in 0..n {
        let ref_order = neighbour_order(reference, i);
        for (pos, &j) in ref_order.iter().enumerate() {
            rank[j] = pos + 1;
        }
        for &j in neighbour_order(candidate, i).iter().take(k) {
            if rank[j] > k {
                total += (rank[j] - k) as f64;
            }
        }
    }
    let (n, kf) = (n as f64, k as f64);
    1.0 - 2.0 / (n * kf * (2.0 * n - 3.0 * kf - 1.0)) * total
}

pub fn trustworthiness<P: AsRef<[f64]>, Q: AsRef<[f64]>>(high: &[P], low: &[Q], k: usize) -> Result<f64> {
    check_pair(high.len(), low.len())?;
    check_k(high.len(), k)?;
    Ok(rank_penalty(&distance_matrix(high), &distance_matrix(low), k))
}

pub fn continuity<P: AsRef<[f64]>, Q: AsRef<[f64]>>(high: &[P], low: &[Q], k: usize) -> Result<f64> {
    check_pair(high.len(), low.len())?;
    check_k(high.len(), k)?;
    Ok(rank_penalty(&distance_matrix(low), &distance_matrix(high), k))
}

fn stress_from(dh: &[Vec<f64>], dl: &[Vec<f64>]) -> Result<f64> {
    let n = dh.len();
    if n < 2 {
        return Err(Error::invalid("normalized stress needs at least 2 points"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = dh[i][j] - dl[i][j];
            num += r * r;
            den += dh[i][j] * dh[i][j];
        }
    }
    if den == 0.0 {
        return Err(Error::invalid("normalized stress is undefined when all points coincide"));
    }
    Ok(num / den)
}

/// `sum (d - d_low)^2 / sum d^2` over all pairs, on raw coordinates.
pub fn normalized_stress<P: AsRef<[f64]>, Q: AsRef<[f64]>>(high: &[P], low: &[Q]) -> Result<f64> {
    check_pair(high.len(), low.len())?;
    stress_from(&distance_matrix(high), &distance_matrix(low))
}

fn condensed(d: &[Vec<f64>]) -> Vec<f64> {
    let n = d.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        out.extend_from_slice(&d[i][i + 1..]);
    }
    out
}

/// Average ranks (1-based), ties share the mean of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::invalid("Shepard goodness is undefined for constant distances"));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation of the pairwise distances in both spaces.
pub fn shepard_goodness<P: AsRef<[f64]>, Q: AsRef<[f64]>>(high: &[P], low: &[Q]) -> Result<f64> {
    check_pair(high.len(), low.len())?;
    if high.len() < 3 {
        return Err(Error::invalid("Shepard goodness needs at least 3 points"));
    }
    spearman(&condensed(&distance_matrix(high)), &condensed(&distance_matrix(low)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x, 0.0]).collect()
    }

    #[test]
    fn single_swap_matches_hand_computation() {
        // Points 1 and 2 trade places in the projection; with k = 1 the
        // intruder ranks sum to 5, so T = 1 - 2*5 / (6*1*8) = 19/24.
        let high = line(&[0.0, 1.0, 3.0, 6.0, 10.0, 15.0]);
        let low = line(&[0.0, 3.0, 1.0, 6.0, 10.0, 15.0]);
        assert!((trustworthiness(&high, &low, 1).unwrap() - 19.0 / 24.0).abs() < 1e-12);
        assert!((continuity(&high, &low, 1).unwrap() - 19.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn identity_projection_is_perfect() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).sin() * 3.0, (i * i) as f64 * 0.1]).collect();
        let q = DRQuality::compute(&pts, &pts).unwrap();
        assert_eq!((q.trustworthiness, q.continuity, q.normalized_stress, q.shepard_goodness), (1.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn doubling_gives_unit_stress() {
        let pts = line(&[0.0, 1.0, 3.0, 7.0]);
        let doubled: Vec<Vec<f64>> = pts.iter().map(|p| vec![2.0 * p[0], 2.0 * p[1]]).collect();
        assert!((normalized_stress(&pts, &doubled).unwrap() - 1.0).abs() < 1e-12);
        assert!((shepard_goodness(&pts, &doubled).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_distance_order_gives_minus_one() {
        // High distances 1, 2, 3 (pairs 01, 12, 02); low distances reversed.
        let high = line(&[0.0, 1.0, 3.0]);
        let low = line(&[0.0, 4.0, 1.0]);
        let dl = distance_matrix(&low);
        assert!(dl[0][1] > dl[1][2] && dl[1][2] > dl[0][2]);
        assert!((shepard_goodness(&high, &low).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_paths() {
        let pts = line(&[0.0, 1.0, 2.0, 3.0]);
        assert!(trustworthiness(&pts, &pts, 0).is_err());
        assert!(trustworthiness(&pts, &pts, 2).is_err());
        assert!(normalized_stress(&line(&[1.0, 1.0]), &line(&[0.0, 1.0])).is_err());
        assert!(shepard_goodness(&line(&[0.0, 1.0, 2.0]), &vec![vec![0.0, 0.0]; 3]).is_err());
        assert!(matches!(normalized_stress(&pts, &pts[..3]), Err(Error::Shape { .. })));
    }

    #[test]
    fn default_k_rule() {
        assert_eq!(default_k(12), 3);
        assert_eq!(default_k(23), 7);
        assert_eq!(default_k(610), 7);
        assert_eq!(default_k(3), 1);
    }
}
