//! Delaunay triangulation, nearest-fibre (Voronoi) assignment and triangle
//! rasterization over the pixel grid.
//!
//! Coordinates are in pixel units with pixel `(x, y)` centred on the point
//! `(x, y)`.

use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::{Error, Result};

pub type Point = (f64, f64);

/// Triangulates `points`, returning counter-clockwise index triples.
///
/// Each triple is rotated so its smallest index comes first and the list is
/// sorted, so the output does not depend on the library's internal face order.
pub fn delaunay(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut handle_to_index = vec![usize::MAX; points.len()];
    for (i, &(x, y)) in points.iter().enumerate() {
        let h = tri
            .insert(Point2::new(x, y))
            .map_err(|e| Error::Layout(format!("fibre {i} at ({x}, {y}): {e:?}")))?;
        if handle_to_index[h.index()] != usize::MAX {
            return Err(Error::Layout(format!(
                "fibre {i} duplicates fibre {}",
                handle_to_index[h.index()]
            )));
        }
        handle_to_index[h.index()] = i;
    }
    let mut out: Vec<[usize; 3]> = tri
        .inner_faces()
        .map(|f| {
            let v = f.vertices().map(|v| handle_to_index[v.fix().index()]);
            canonical_ccw(points, v)
        })
        .collect();
    if out.is_empty() {
        return Err(Error::Layout("fibres are collinear; cannot triangulate".into()));
    }
    out.sort_unstable();
    Ok(out)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn canonical_ccw(points: &[Point], mut t: [usize; 3]) -> [usize; 3] {
    if orient(points[t[0]], points[t[1]], points[t[2]]) < 0.0 {
        t.swap(1, 2);
    }
    let k = (0..3).min_by_key(|&k| t[k]).unwrap();
    t.rotate_left(k);
    t
}

/// Uniform bucket grid for nearest-fibre queries.
pub struct NearestIndex<'a> {
    points: &'a [Point],
    cell: f64,
    cols: usize,
    rows: usize,
    origin: Point,
    buckets: Vec<Vec<usize>>,
}

impl<'a> NearestIndex<'a> {
    pub fn new(points: &'a [Point]) -> Self {
        assert!(!points.is_empty());
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let area = ((x1 - x0) * (y1 - y0)).max(1.0);
        let cell = (area / points.len() as f64).sqrt().max(1.0);
        let cols = ((x1 - x0) / cell) as usize + 1;
        let rows = ((y1 - y0) / cell) as usize + 1;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (i, &(x, y)) in points.iter().enumerate() {
            let cx = (((x - x0) / cell) as usize).min(cols - 1);
            let cy = (((y - y0) / cell) as usize).min(rows - 1);
            buckets[cy * cols + cx].push(i);
        }
        Self { points, cell, cols, rows, origin: (x0, y0), buckets }
    }

    /// Index of the point nearest to `(x, y)`; equal distances resolve to
    /// the lowest index.
    pub fn nearest(&self, x: f64, y: f64) -> usize {
        let fx = (x - self.origin.0) / self.cell;
        let fy = (y - self.origin.1) / self.cell;
        let cx = fx.floor().clamp(0.0, (self.cols - 1) as f64) as isize;
        let cy = fy.floor().clamp(0.0, (self.rows - 1) as f64) as isize;
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        let max_ring = self.cols.max(self.rows) as isize;
        for ring in 0..=max_ring {
            for by in (cy - ring)..=(cy + ring) {
                if by < 0 || by >= self.rows as isize {
                    continue;
                }
                for bx in (cx - ring)..=(cx + ring) {
                    if bx < 0 || bx >= self.cols as isize {
                        continue;
                    }
                    // Only the ring's outline; the interior was visited earlier.
                    if (by - cy).abs() != ring && (bx - cx).abs() != ring {
                        continue;
                    }
                    for &i in &self.buckets[by as usize * self.cols + bx as usize] {
                        let (px, py) = self.points[i];
                        let d = (px - x) * (px - x) + (py - y) * (py - y);
                        if d < best_d || (d == best_d && i < best) {
                            best_d = d;
                            best = i;
                        }
                    }
                }
            }
            // Unscanned buckets lie beyond the square of rings scanned so
            // far; the distance to its nearest open side bounds them.
            let mut bound = f64::INFINITY;
            if cx - ring > 0 {
                bound = bound.min(fx - (cx - ring) as f64);
            }
            if cx + ring + 1 < self.cols as isize {
                bound = bound.min((cx + ring + 1) as f64 - fx);
            }
            if cy - ring > 0 {
                bound = bound.min(fy - (cy - ring) as f64);
            }
            if cy + ring + 1 < self.rows as isize {
                bound = bound.min((cy + ring + 1) as f64 - fy);
            }
            if bound == f64::INFINITY {
                break;
            }
            if best != usize::MAX && bound > 0.0 && (bound * self.cell).powi(2) > best_d {
                break;
            }
        }
        best
    }
}

/// Barycentric weights of `p` in triangle `(a, b, c)`.
#[inline]
pub fn barycentric(a: Point, b: Point, c: Point, p: Point) -> [f64; 3] {
    let det = (b.1 - c.1) * (a.0 - c.0) + (c.0 - b.0) * (a.1 - c.1);
    let l0 = ((b.1 - c.1) * (p.0 - c.0) + (c.0 - b.0) * (p.1 - c.1)) / det;
    let l1 = ((c.1 - a.1) * (p.0 - c.0) + (a.0 - c.0) * (p.1 - c.1)) / det;
    [l0, l1, 1.0 - l0 - l1]
}

/// Pixel -> (triangle index, barycentric weights) for every pixel centre of a
/// `width`x`height` grid covered by a triangle. Pixels on shared edges go to
/// the first triangle in list order.
pub fn rasterize(
    points: &[Point],
    triangles: &[[usize; 3]],
    width: usize,
    height: usize,
) -> Vec<Option<(u32, [f64; 3])>> {
    const EDGE_EPS: f64 = 1e-9;
    let mut out = vec![None; width * height];
    for (ti, t) in triangles.iter().enumerate() {
        let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
        let x0 = a.0.min(b.0).min(c.0).ceil().max(0.0) as usize;
        let y0 = a.1.min(b.1).min(c.1).ceil().max(0.0) as usize;
        let x1 = a.0.max(b.0).max(c.0).floor();
        let y1 = a.1.max(b.1).max(c.1).floor();
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let x1 = (x1 as usize).min(width - 1);
        let y1 = (y1 as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let slot = &mut out[y * width + x];
                if slot.is_some() {
                    continue;
                }
                let w = barycentric(a, b, c, (x as f64, y as f64));
                if w.iter().all(|&l| l >= -EDGE_EPS) {
                    *slot = Some((ti as u32, w));
                }
            }
        }
    }
    out
}
