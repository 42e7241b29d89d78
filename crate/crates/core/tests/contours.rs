mod common;

use common::{region_count, smooth_field};
use scatteruq_core::plotengine::{cell_segments, marching_squares, BoundingBox, Grid};
use std::collections::HashMap;

fn grid(values: Vec<f64>, n: usize) -> Grid {
    Grid::new(BoundingBox { min: [0.0, 0.0], max: [1.0, 1.0] }, n, n, values).unwrap()
}

#[test]
fn loop_count_matches_region_oracle() {
    for seed in 0..50u64 {
        let n = 24 + (seed as usize % 3) * 20;
        let values = smooth_field(n, seed);
        let g = grid(values.clone(), n);
        let peak = g.max();
        for rel in [0.1, 0.3, 0.5, 0.8] {
            let level = rel * peak;
            let lines = marching_squares(&g, level);
            assert!(lines.iter().all(|l| l.first() == l.last() && l.len() >= 4), "seed {seed}");
            assert_eq!(lines.len(), region_count(&values, n, level), "seed {seed} level {rel}");
        }
    }
}

#[test]
fn at_most_two_segments_per_cell_on_cell_edges() {
    for seed in 0..50u64 {
        let n = 32;
        let g = grid(smooth_field(n, 100 + seed), n);
        let level = 0.4 * g.max();
        let mut per_cell: HashMap<(usize, usize), usize> = HashMap::new();
        for s in cell_segments(&g, level) {
            *per_cell.entry(s.cell).or_default() += 1;
            let (i, j) = s.cell;
            let lo = g.node(i, j);
            let hi = g.node(i + 1, j + 1);
            for p in [s.from, s.to] {
                let on_x = (p[0] - lo[0]).abs() < 1e-12 || (p[0] - hi[0]).abs() < 1e-12;
                let on_y = (p[1] - lo[1]).abs() < 1e-12 || (p[1] - hi[1]).abs() < 1e-12;
                assert!(on_x || on_y);
                assert!(p[0] >= lo[0] - 1e-12 && p[0] <= hi[0] + 1e-12);
                assert!(p[1] >= lo[1] - 1e-12 && p[1] <= hi[1] + 1e-12);
            }
        }
        assert!(per_cell.values().all(|&c| c == 1 || c == 2));
    }
}

#[test]
fn crossings_are_linear_interpolations() {
    let n = 20;
    let g = grid(smooth_field(n, 7), n);
    let level = 0.5 * g.max();
    for s in cell_segments(&g, level) {
        for p in [s.from, s.to] {
            // Bilinear interpolation of the grid at a crossing on an edge is
            // linear along that edge and must equal the level.
            let fx = (p[0] - g.origin[0]) / g.step[0];
            let fy = (p[1] - g.origin[1]) / g.step[1];
            let (i, j) = (fx.floor().min((n - 2) as f64) as usize, fy.floor().min((n - 2) as f64) as usize);
            let (tx, ty) = (fx - i as f64, fy - j as f64);
            let v = g.at(i, j) * (1.0 - tx) * (1.0 - ty)
                + g.at(i + 1, j) * tx * (1.0 - ty)
                + g.at(i, j + 1) * (1.0 - tx) * ty
                + g.at(i + 1, j + 1) * tx * ty;
            assert!((v - level).abs() < 1e-9 * g.max().max(1.0));
        }
    }
}

#[test]
fn open_chains_when_border_is_above_level() {
    // A ramp cut by a level crosses the domain without closing.
    let n = 10;
    let values: Vec<f64> = (0..n * n).map(|k| (k % n) as f64).collect();
    let lines = marching_squares(&grid(values, n), 4.5);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0].len(), n);
    assert_ne!(lines[0].first(), lines[0].last());
}
