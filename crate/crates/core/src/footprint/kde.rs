//! Gaussian kernel density surface and mass-contour extraction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::footprint::{LocalPlane, Polygon};
use crate::geo::GeoPoint;

/// Default contouring grid resolution.
pub const DEFAULT_CELL_SIZE_M: f64 = 50.0;

/// Default density mass enclosed by [`kde_contour`].
pub const DEFAULT_MASS_LEVEL: f64 = 0.90;

/// Upper bound on grid cells, guarding against accidental huge
/// allocations from a tiny cell size over a wide point set.
const MAX_GRID_CELLS: usize = 16_000_000;

/// A kernel density surface sampled on a regular grid of square cells in
/// the local plane. Values are densities per square meter at cell
/// centers, row-major with row 0 at the southern edge; the surface's
/// numerical integral over the grid is ≈ 1.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    /// Southwest corner of the grid.
    pub origin: GeoPoint,
    /// Side length of the square cells, meters.
    pub cell_size_m: f64,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major cell-center densities, non-negative and finite.
    pub values: Vec<f64>,
    plane: LocalPlane,
    x0: f64,
    y0: f64,
}

impl DensityGrid {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    /// Geographic position of a cell's center.
    pub fn cell_center(&self, row: usize, col: usize) -> GeoPoint {
        self.plane.to_point(
            self.x0 + (col as f64 + 0.5) * self.cell_size_m,
            self.y0 + (row as f64 + 0.5) * self.cell_size_m,
        )
    }

    fn center_xy(&self, row: isize, col: isize) -> (f64, f64) {
        (
            self.x0 + (col as f64 + 0.5) * self.cell_size_m,
            self.y0 + (row as f64 + 0.5) * self.cell_size_m,
        )
    }

    pub(crate) fn plane(&self) -> LocalPlane {
        self.plane
    }
}

/// Sample standard deviation (n − 1 denominator).
fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    debug_assert!(n >= 2.0);
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt()
}

/// Estimates a Gaussian kernel density surface over the point set.
///
/// The grid covers the points' bounding box padded by 3 bandwidths on
/// every side, at `cell_size_m` resolution. When no bandwidth is given,
/// Scott's rule is used: `n^(-1/6)` times the mean of the two per-axis
/// sample standard deviations. All-coincident points have no spread to
/// estimate — that is a [`Error::ZeroVariance`]; emit the bare points
/// instead of a density footprint.
pub fn kde_surface(
    points: &[GeoPoint],
    bandwidth_m: Option<f64>,
    cell_size_m: f64,
) -> Result<DensityGrid> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "density estimation needs at least 3 points, got {n}"
        )));
    }
    if !cell_size_m.is_finite() || cell_size_m <= 0.0 {
        return Err(Error::Config(format!(
            "cell size must be positive, got {cell_size_m}"
        )));
    }
    if let Some(h) = bandwidth_m {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::Config(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
    }

    let plane = LocalPlane::around(points)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&p| plane.to_xy(p)).unzip();

    let sigma = (sample_std(&xs) + sample_std(&ys)) / 2.0;
    if sigma == 0.0 {
        return Err(Error::ZeroVariance(
            "all points coincide; no density surface exists — \
             emit the points themselves instead"
                .to_string(),
        ));
    }
    let h = bandwidth_m.unwrap_or_else(|| (n as f64).powf(-1.0 / 6.0) * sigma);

    let min_x = xs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let max_x = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let min_y = ys.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let max_y = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let n_cols = (((max_x - min_x) / cell_size_m).ceil() as usize).max(1);
    let n_rows = (((max_y - min_y) / cell_size_m).ceil() as usize).max(1);
    if n_rows.saturating_mul(n_cols) > MAX_GRID_CELLS {
        return Err(Error::Config(format!(
            "a {n_rows} x {n_cols} density grid is too large; \
             increase the cell size"
        )));
    }

    let norm = 1.0 / (n as f64 * 2.0 * std::f64::consts::PI * h * h);
    let inv_2h2 = 1.0 / (2.0 * h * h);
    let mut values = Vec::with_capacity(n_rows * n_cols);
    for r in 0..n_rows {
        let cy = min_y + (r as f64 + 0.5) * cell_size_m;
        for c in 0..n_cols {
            let cx = min_x + (c as f64 + 0.5) * cell_size_m;
            let mut acc = 0.0;
            for i in 0..n {
                let dx = cx - xs[i];
                let dy = cy - ys[i];
                acc += (-(dx * dx + dy * dy) * inv_2h2).exp();
            }
            values.push(acc * norm);
        }
    }

    Ok(DensityGrid {
        origin: plane.to_point(min_x, min_y),
        cell_size_m,
        n_rows,
        n_cols,
        values,
        plane,
        x0: min_x,
        y0: min_y,
    })
}

/// Density value such that the cells at or above it hold at least
/// `mass_level` of the grid's total mass.
fn mass_threshold(values: &[f64], mass_level: f64) -> f64 {
    let total: f64 = values.iter().sum();
    let target = mass_level * total;
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    for &v in &sorted {
        cum += v;
        if cum >= target {
            return v;
        }
    }
    *sorted.last().expect("non-empty grid")
}

/// Traces the isolines enclosing `mass_level` of the density mass.
///
/// The threshold is the highest-density-region level: cells are admitted
/// in decreasing density order until their mass reaches `mass_level` of
/// the total, and the last admitted cell's density is the isovalue. The
/// isolines are then traced by marching squares over cell-center samples
/// (the grid is framed with zero so every line closes), yielding one or
/// more counterclockwise polygons. A flat grid has no isolines at any
/// level — that is a [`Error::FlatGrid`].
pub fn kde_contour(grid: &DensityGrid, mass_level: f64) -> Result<Vec<Polygon>> {
    if !(mass_level > 0.0 && mass_level <= 1.0) {
        return Err(Error::Config(format!(
            "mass level must be in (0, 1], got {mass_level}"
        )));
    }
    let max = grid.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    if grid.values.is_empty() || max == min {
        return Err(Error::FlatGrid);
    }
    let threshold = mass_threshold(&grid.values, mass_level);
    debug_assert!(threshold > 0.0);

    trace_isolines(grid, threshold)
}

/// Marching squares over the framed node lattice.
///
/// Nodes are cell centers plus a surrounding frame of zero-density nodes;
/// a node is inside when its value is at or above the threshold. Each
/// lattice cell contributes directed segments oriented with the inside on
/// the left, so loops around dense regions come out counterclockwise;
/// segments chain into loops via the identity of the lattice edge each
/// endpoint crosses, which both adjacent cells compute identically.
fn trace_isolines(grid: &DensityGrid, threshold: f64) -> Result<Vec<Polygon>> {
    let rows = grid.n_rows as isize;
    let cols = grid.n_cols as isize;
    // Node (r, c) for r in -1..=rows, c in -1..=cols; the frame is 0.
    let node_value = |r: isize, c: isize| -> f64 {
        if r >= 0 && r < rows && c >= 0 && c < cols {
            grid.value(r as usize, c as usize)
        } else {
            0.0
        }
    };
    let node_id = |r: isize, c: isize| -> usize {
        ((r + 1) * (cols + 2) + (c + 1)) as usize
    };
    // Crossing position on the lattice edge between two nodes, computed
    // from the canonical node order so both adjacent cells agree bitwise.
    let crossing = |ra: isize, ca: isize, rb: isize, cb: isize| -> (f64, f64) {
        let ((r0, c0), (r1, c1)) = if node_id(ra, ca) <= node_id(rb, cb) {
            ((ra, ca), (rb, cb))
        } else {
            ((rb, cb), (ra, ca))
        };
        let v0 = node_value(r0, c0);
        let v1 = node_value(r1, c1);
        let t = ((threshold - v0) / (v1 - v0)).clamp(1e-9, 1.0 - 1e-9);
        let (x0, y0) = grid.center_xy(r0, c0);
        let (x1, y1) = grid.center_xy(r1, c1);
        (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
    };
    let edge_key = |ra: isize, ca: isize, rb: isize, cb: isize| -> (usize, usize) {
        let a = node_id(ra, ca);
        let b = node_id(rb, cb);
        (a.min(b), a.max(b))
    };

    // Directed segments: start edge → end edge, keyed by start edge.
    struct Segment {
        end_key: (usize, usize),
        start_xy: (f64, f64),
    }
    let mut by_start: BTreeMap<(usize, usize), Segment> = BTreeMap::new();

    // Cell (i, j) has corner nodes BL=(i,j), BR=(i,j+1), TR=(i+1,j+1),
    // TL=(i+1,j) and edges S (BL-BR), E (BR-TR), N (TL-TR), W (BL-TL).
    #[derive(Clone, Copy)]
    enum Side {
        S,
        E,
        N,
        W,
    }
    for i in -1..rows {
        for j in -1..cols {
            let bl = node_value(i, j) >= threshold;
            let br = node_value(i, j + 1) >= threshold;
            let tr = node_value(i + 1, j + 1) >= threshold;
            let tl = node_value(i + 1, j) >= threshold;
            let case =
                (bl as usize) | ((br as usize) << 1) | ((tr as usize) << 2) | ((tl as usize) << 3);
            let segments: &[(Side, Side)] = match case {
                0 | 15 => &[],
                1 => &[(Side::S, Side::W)],
                2 => &[(Side::E, Side::S)],
                3 => &[(Side::E, Side::W)],
                4 => &[(Side::N, Side::E)],
                6 => &[(Side::N, Side::S)],
                7 => &[(Side::N, Side::W)],
                8 => &[(Side::W, Side::N)],
                9 => &[(Side::S, Side::N)],
                11 => &[(Side::E, Side::N)],
                12 => &[(Side::W, Side::E)],
                13 => &[(Side::S, Side::E)],
                14 => &[(Side::W, Side::S)],
                5 | 10 => {
                    let center = (node_value(i, j)
                        + node_value(i, j + 1)
                        + node_value(i + 1, j + 1)
                        + node_value(i + 1, j))
                        / 4.0;
                    let center_inside = center >= threshold;
                    match (case, center_inside) {
                        (5, true) => &[(Side::S, Side::E), (Side::N, Side::W)],
                        (5, false) => &[(Side::S, Side::W), (Side::N, Side::E)],
                        (10, true) => &[(Side::W, Side::S), (Side::E, Side::N)],
                        (10, false) => &[(Side::E, Side::S), (Side::W, Side::N)],
                        _ => unreachable!(),
                    }
                }
                _ => unreachable!("case is 4 bits"),
            };
            for &(from, to) in segments {
                let side_nodes = |s: Side| -> ((isize, isize), (isize, isize)) {
                    match s {
                        Side::S => ((i, j), (i, j + 1)),
                        Side::E => ((i, j + 1), (i + 1, j + 1)),
                        Side::N => ((i + 1, j), (i + 1, j + 1)),
                        Side::W => ((i, j), (i + 1, j)),
                    }
                };
                let ((ra, ca), (rb, cb)) = side_nodes(from);
                let ((rc, cc), (rd, cd)) = side_nodes(to);
                let start_key = edge_key(ra, ca, rb, cb);
                let seg = Segment {
                    end_key: edge_key(rc, cc, rd, cd),
                    start_xy: crossing(ra, ca, rb, cb),
                };
                if by_start.insert(start_key, seg).is_some() {
                    return Err(Error::Internal(
                        "isoline tracing crossed one lattice edge twice".to_string(),
                    ));
                }
            }
        }
    }

    // Chain segments into loops; each loop visits each start edge once.
    let mut polygons = Vec::new();
    let mut visited: std::collections::BTreeSet<(usize, usize)> = Default::default();
    let starts: Vec<(usize, usize)> = by_start.keys().copied().collect();
    for start in starts {
        if visited.contains(&start) {
            continue;
        }
        let mut ring_xy: Vec<(f64, f64)> = Vec::new();
        let mut cur = start;
        loop {
            let seg = by_start.get(&cur).ok_or_else(|| {
                Error::Internal("isoline ended at an uncrossed lattice edge".to_string())
            })?;
            visited.insert(cur);
            ring_xy.push(seg.start_xy);
            cur = seg.end_key;
            if cur == start {
                break;
            }
        }
        if ring_xy.len() < 3 {
            continue;
        }
        // Inner boundaries of a region (holes) trace clockwise; normalize
        // every ring to counterclockwise.
        let mut area2 = 0.0;
        for i in 0..ring_xy.len() {
            let (x0, y0) = ring_xy[i];
            let (x1, y1) = ring_xy[(i + 1) % ring_xy.len()];
            area2 += x0 * y1 - x1 * y0;
        }
        if area2 < 0.0 {
            ring_xy.reverse();
        }
        let plane = grid.plane();
        let ring: Vec<GeoPoint> = ring_xy.iter().map(|&(x, y)| plane.to_point(x, y)).collect();
        polygons.push(Polygon::new(ring)?);
    }
    Ok(polygons)
}
