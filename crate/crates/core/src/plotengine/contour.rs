//! Weighted 2-D kernel density on a regular grid and marching-squares
//! level sets.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::silverman_bandwidth;

pub const GRID_SIZE: usize = 64;
pub const RELATIVE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BoundingBox {
    /// Tight box around `points` grown by `pad` of its extent on every side.
    /// A flat axis gets a unit half-width instead.
    pub fn around(points: &[[f64; 2]], pad: f64) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            for a in 0..2 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        for a in 0..2 {
            if !min[a].is_finite() {
                min[a] = -1.0;
                max[a] = 1.0;
                continue;
            }
            let span = max[a] - min[a];
            let grow = if span > 0.0 { span * pad } else { 1.0 };
            min[a] -= grow;
            max[a] += grow;
        }
        Self { min, max }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let eps = 1e-9 * (self.max[0] - self.min[0]).max(self.max[1] - self.min[1]);
        (0..2).all(|a| p[a] >= self.min[a] - eps && p[a] <= self.max[a] + eps)
    }
}

/// Scalar field sampled at `nx * ny` nodes; `values[j * nx + i]` sits at
/// `(min_x + i * dx, min_y + j * dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub step: [f64; 2],
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(bbox: BoundingBox, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!("grid must be at least 2x2, got {nx}x{ny}")));
        }
        if values.len() != nx * ny {
            return Err(Error::Shape {
                what: "grid values",
                expected: nx * ny,
                got: values.len(),
            });
        }
        Ok(Self {
            nx,
            ny,
            origin: bbox.min,
            step: [
                (bbox.max[0] - bbox.min[0]) / (nx - 1) as f64,
                (bbox.max[1] - bbox.min[1]) / (ny - 1) as f64,
            ],
            values,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.step[0],
            self.origin[1] + j as f64 * self.step[1],
        ]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Gaussian product-kernel density with per-axis Silverman bandwidths,
/// sampled on a `count x count` grid over `bbox`. The outer ring of nodes is
/// set to zero so every level set closes inside the box.
pub fn weighted_density(points: &[[f64; 2]], weights: &[f64], bbox: BoundingBox, count: usize) -> Result<Grid> {
    if points.len() != weights.len() {
        return Err(Error::Shape {
            what: "contour weights",
            expected: points.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("contour weights must be finite and non-negative"));
    }
    let mut h = [0.0; 2];
    for a in 0..2 {
        let xs: Vec<f64> = points.iter().map(|p| p[a]).collect();
        h[a] = silverman_bandwidth(&xs);
        if !(h[a] > 0.0) {
            h[a] = (bbox.max[a] - bbox.min[a]) / 10.0;
        }
    }
    let total: f64 = weights.iter().sum();
    let mut grid = Grid::new(bbox, count, count, vec![0.0; count * count])?;
    if total <= 0.0 {
        return Ok(grid);
    }
    let norm = total * 2.0 * std::f64::consts::PI * h[0] * h[1];
    for j in 1..count - 1 {
        for i in 1..count - 1 {
            let [x, y] = grid.node(i, j);
            let mut s = 0.0;
            for (p, w) in points.iter().zip(weights) {
                let u = (x - p[0]) / h[0];
                let v = (y - p[1]) / h[1];
                s += w * (-0.5 * (u * u + v * v)).exp();
            }
            grid.values[j * count + i] = s / norm;
        }
    }
    Ok(grid)
}

/// One crossing segment produced by a single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSegment {
    pub cell: (usize, usize),
    pub from: [f64; 2],
    pub to: [f64; 2],
    edges: (EdgeKey, EdgeKey),
}

// Horizontal edge (i, j)-(i+1, j) or vertical edge (i, j)-(i, j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    H(usize, usize),
    V(usize, usize),
}

const BOTTOM: u8 = 0;
const RIGHT: u8 = 1;
const TOP: u8 = 2;
const LEFT: u8 = 3;

fn edge_pairs(case: u8, center_inside: bool) -> &'static [(u8, u8)] {
    match case {
        1 | 14 => &[(LEFT, BOTTOM)],
        2 | 13 => &[(BOTTOM, RIGHT)],
        3 | 12 => &[(LEFT, RIGHT)],
        4 | 11 => &[(RIGHT, TOP)],
        6 | 9 => &[(BOTTOM, TOP)],
        7 | 8 => &[(LEFT, TOP)],
        5 if center_inside => &[(BOTTOM, RIGHT), (TOP, LEFT)],
        5 => &[(LEFT, BOTTOM), (RIGHT, TOP)],
        10 if center_inside => &[(LEFT, BOTTOM), (RIGHT, TOP)],
        10 => &[(BOTTOM, RIGHT), (TOP, LEFT)],
        _ => &[],
    }
}

/// Nodes strictly above `level` are inside.
fn crossing(grid: &Grid, key: EdgeKey, level: f64) -> [f64; 2] {
    let ((i0, j0), (i1, j1)) = match key {
        EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
        EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
    };
    let (a, b) = (grid.at(i0, j0), grid.at(i1, j1));
    let t = ((level - a) / (b - a)).clamp(0.0, 1.0);
    let (p, q) = (grid.node(i0, j0), grid.node(i1, j1));
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Raw marching-squares output: at most two segments per cell. Saddles are
/// resolved by the cell-centre average.
pub fn cell_segments(grid: &Grid, level: f64) -> Vec<CellSegment> {
    let mut out = Vec::new();
    for j in 0..grid.ny - 1 {
        for i in 0..grid.nx - 1 {
            let c = [grid.at(i, j), grid.at(i + 1, j), grid.at(i + 1, j + 1), grid.at(i, j + 1)];
            let case = c
                .iter()
                .enumerate()
                .fold(0u8, |acc, (b, &v)| if v > level { acc | (1 << b) } else { acc });
            let centre = c.iter().sum::<f64>() / 4.0 > level;
            for &(e0, e1) in edge_pairs(case, centre) {
                let key = |e: u8| match e {
                    BOTTOM => EdgeKey::H(i, j),
                    RIGHT => EdgeKey::V(i + 1, j),
                    TOP => EdgeKey::H(i, j + 1),
                    _ => EdgeKey::V(i, j),
                };
                let (k0, k1) = (key(e0), key(e1));
                out.push(CellSegment {
                    cell: (i, j),
                    from: crossing(grid, k0, level),
                    to: crossing(grid, k1, level),
                    edges: (k0, k1),
                });
            }
        }
    }
    out
}

/// Level set of `grid` at `level` as polylines. Closed loops repeat their
/// first point at the end.
pub fn marching_squares(grid: &Grid, level: f64) -> Vec<Vec<[f64; 2]>> {
    let segs = cell_segments(grid, level);
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, seg) in segs.iter().enumerate() {
        by_edge.entry(seg.edges.0).or_default().push(s);
        by_edge.entry(seg.edges.1).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();

    let walk = |start: usize, from_edge: EdgeKey, used: &mut Vec<bool>| {
        let point_of = |k: EdgeKey| {
            let s = &segs[by_edge[&k][0]];
            if s.edges.0 == k { s.from } else { s.to }
        };
        let mut line = vec![point_of(from_edge)];
        let (mut seg, mut entry) = (start, from_edge);
        loop {
            used[seg] = true;
            let s = &segs[seg];
            let exit = if s.edges.0 == entry { s.edges.1 } else { s.edges.0 };
            line.push(if s.edges.0 == entry { s.to } else { s.from });
            match by_edge[&exit].iter().find(|&&n| !used[n]) {
                Some(&n) => {
                    seg = n;
                    entry = exit;
                }
                None => break,
            }
        }
        line
    };

    // Open chains start at edges touched by a single segment.
    let mut open_starts: Vec<(EdgeKey, usize)> = by_edge
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(k, v)| (*k, v[0]))
        .collect();
    open_starts.sort_by_key(|(_, s)| *s);
    for (k, s) in open_starts {
        if !used[s] {
            lines.push(walk(s, k, &mut used));
        }
    }
    for s in 0..segs.len() {
        if !used[s] {
            lines.push(walk(s, segs[s].edges.0, &mut used));
        }
    }
    lines
}

/// All polylines of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoLines {
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Weighted density contours at `relative_levels` times the grid maximum.
/// All-zero weights give no contours.
pub fn contour_field(
    points: &[[f64; 2]],
    weights: &[f64],
    bbox: BoundingBox,
    count: usize,
    relative_levels: &[f64],
) -> Result<Vec<IsoLines>> {
    if count < 8 {
        return Err(Error::invalid(format!("contour grid must be at least 8x8, got {count}")));
    }
    if relative_levels.windows(2).any(|w| w[0] >= w[1]) || relative_levels.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::invalid("contour levels must be positive and strictly increasing"));
    }
    let grid = weighted_density(points, weights, bbox, count)?;
    let peak = grid.max();
    if peak <= 0.0 {
        return Ok(Vec::new());
    }
    Ok(relative_levels
        .iter()
        .map(|r| {
            let level = r * peak;
            IsoLines {
                level,
                polylines: marching_squares(&grid, level),
            }
        })
        .filter(|iso| !iso.polylines.is_empty())
        .collect())
}
