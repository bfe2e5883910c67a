use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::geometry::{delaunay, rasterize, NearestIndex, Point};
use crate::imagecore::Mask;
use crate::{Error, Result};

/// Fibre centres of a probe together with their Delaunay triangulation and
/// the Voronoi assignment of in-FoV pixels.
///
/// Pixel `(x, y)` is centred at the point `(x, y)`; fibre positions use the
/// same coordinates.
#[derive(Debug, Clone)]
pub struct FibreLayout {
    width: usize,
    height: usize,
    fibres: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    fov: Mask,
    /// Nearest fibre for each in-FoV pixel.
    nearest: Vec<Option<u32>>,
    cells: Vec<Vec<usize>>,
    /// Containing triangle and barycentric weights for in-FoV, in-hull pixels.
    coverage: Vec<Option<(u32, [f64; 3])>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Centre-to-centre pitch of the hexagonal lattice in pixels.
    pub spacing: f64,
    /// Maximum displacement as a fraction of `spacing`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self { spacing: 4.0, jitter: 0.3, seed: 0 }
    }
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing >= 2.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("layout spacing {} must be >= 2 pixels", self.spacing)));
        }
        if !(0.0..=0.5).contains(&self.jitter) {
            return Err(Error::InvalidParameter(format!("layout jitter {} must lie in [0, 0.5]", self.jitter)));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct LayoutRow {
    fibre_id: usize,
    x: f64,
    y: f64,
}

fn fov_contains(fov: &Mask, (x, y): Point) -> bool {
    let (rx, ry) = (x.round(), y.round());
    rx >= 0.0 && ry >= 0.0 && (rx as usize) < fov.width() && (ry as usize) < fov.height() && fov.get(rx as usize, ry as usize)
}

/// Jittered hexagonal lattice clipped to the FoV.
pub fn generate_layout(width: usize, height: usize, params: &LatticeParams, fov: &Mask) -> Result<FibreLayout> {
    params.validate()?;
    check_fov(width, height, fov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pitch = params.spacing;
    let row_step = pitch * 3f64.sqrt() / 2.0;
    let radius = params.jitter * pitch;
    // Lattice anchored at the frame centre so it is symmetric in the frame.
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let rows_half = (height as f64 / row_step).ceil() as i64 + 1;
    let cols_half = (width as f64 / pitch).ceil() as i64 + 1;
    let mut fibres = Vec::new();
    for r in -rows_half..=rows_half {
        let y = cy + r as f64 * row_step;
        let shift = if r.rem_euclid(2) == 1 { pitch / 2.0 } else { 0.0 };
        for c in -cols_half..=cols_half {
            let x = cx + c as f64 * pitch + shift;
            // Draw the offset for every lattice site so the stream does not
            // depend on which sites are later discarded.
            let (u, theta): (f64, f64) = (rng.random(), rng.random());
            let rr = radius * u.sqrt();
            let theta = theta * std::f64::consts::TAU;
            let p = (x + rr * theta.cos(), y + rr * theta.sin());
            if p.0 < -0.5 || p.1 < -0.5 || p.0 >= width as f64 - 0.5 || p.1 >= height as f64 - 0.5 {
                continue;
            }
            if fov_contains(fov, p) {
                fibres.push(p);
            }
        }
    }
    FibreLayout::from_positions(width, height, fibres, fov.clone())
}

fn check_fov(width: usize, height: usize, fov: &Mask) -> Result<()> {
    if fov.width() != width || fov.height() != height {
        return Err(Error::Dimensions(format!(
            "FoV {}x{} does not match frame {}x{}",
            fov.width(),
            fov.height(),
            width,
            height
        )));
    }
    Ok(())
}

/// Reads a `fibre_id,x,y` CSV. Fibres are indexed in file order.
pub fn load_layout(path: impl AsRef<Path>, width: usize, height: usize, fov: &Mask) -> Result<FibreLayout> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut fibres = Vec::new();
    for row in rdr.deserialize::<LayoutRow>() {
        let row = row?;
        fibres.push((row.x, row.y));
    }
    FibreLayout::from_positions(width, height, fibres, fov.clone())
}

impl FibreLayout {
    /// Builds the layout from explicit positions.
    ///
    /// Errors on non-finite, out-of-frame or duplicate positions, positions
    /// outside the FoV, and fewer than three fibres.
    pub fn from_positions(width: usize, height: usize, fibres: Vec<Point>, fov: Mask) -> Result<Self> {
        check_fov(width, height, &fov)?;
        if fibres.len() < 3 {
            return Err(Error::Layout(format!("{} fibres; at least 3 are needed", fibres.len())));
        }
        for (i, &(x, y)) in fibres.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() || x < -0.5 || y < -0.5 || x >= width as f64 - 0.5 || y >= height as f64 - 0.5 {
                return Err(Error::Layout(format!("fibre {i} at ({x}, {y}) is outside the {width}x{height} frame")));
            }
            if !fov_contains(&fov, (x, y)) {
                return Err(Error::Layout(format!("fibre {i} at ({x}, {y}) is outside the field of view")));
            }
        }
        let mut sorted: Vec<(u64, u64, usize)> = fibres.iter().enumerate().map(|(i, p)| (p.0.to_bits(), p.1.to_bits(), i)).collect();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(Error::Layout(format!("fibres {} and {} share a position", w[0].2, w[1].2)));
        }
        let triangles = delaunay(&fibres)?;

        let index = NearestIndex::new(&fibres);
        let mut nearest = vec![None; width * height];
        let mut cells = vec![Vec::new(); fibres.len()];
        for y in 0..height {
            for x in 0..width {
                if fov.get(x, y) {
                    let f = index.nearest(x as f64, y as f64);
                    nearest[y * width + x] = Some(f as u32);
                    cells[f].push(y * width + x);
                }
            }
        }
        let mut coverage = rasterize(&fibres, &triangles, width, height);
        for (c, &inside) in coverage.iter_mut().zip(fov.bits()) {
            if !inside {
                *c = None;
            }
        }
        Ok(Self { width, height, fibres, triangles, fov, nearest, cells, coverage })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fibres(&self) -> &[Point] {
        &self.fibres
    }

    pub fn len(&self) -> usize {
        self.fibres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibres.is_empty()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn fov(&self) -> &Mask {
        &self.fov
    }

    /// Row-major pixel indices assigned to each fibre's Voronoi cell.
    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    /// Nearest fibre of pixel `i` (row-major), `None` outside the FoV.
    pub fn nearest_fibre(&self, i: usize) -> Option<usize> {
        self.nearest[i].map(|f| f as usize)
    }

    /// Containing triangle and barycentric weights of pixel `i`, `None`
    /// outside the FoV or the convex hull.
    pub fn coverage(&self, i: usize) -> Option<(usize, [f64; 3])> {
        self.coverage[i].map(|(t, w)| (t as usize, w))
    }

    /// Hex SHA-256 over frame size, fibre coordinates and FoV.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.width as u64).to_le_bytes());
        h.update((self.height as u64).to_le_bytes());
        for &(x, y) in &self.fibres {
            h.update(x.to_bits().to_le_bytes());
            h.update(y.to_bits().to_le_bytes());
        }
        let packed: Vec<u8> = self.fov.bits().iter().map(|&b| b as u8).collect();
        h.update(&packed);
        hex::encode(h.finalize())
    }

    /// Writes the `fibre_id,x,y` CSV read by [`load_layout`].
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for (i, &(x, y)) in self.fibres.iter().enumerate() {
            w.serialize(LayoutRow { fibre_id: i, x, y })?;
        }
        w.flush().map_err(|e| Error::Write { path: path.to_path_buf(), source: e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::circular_fov;

    #[test]
    fn zero_jitter_is_exact_lattice() {
        let fov = Mask::full(80, 80);
        let l = generate_layout(80, 80, &LatticeParams { spacing: 6.0, jitter: 0.0, seed: 1 }, &fov).unwrap();
        let pts = l.fibres();
        for (i, &(x, y)) in pts.iter().enumerate() {
            if x < 10.0 || y < 10.0 || x > 70.0 || y > 70.0 {
                continue;
            }
            let nn = pts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &(u, v))| ((u - x).powi(2) + (v - y).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!((nn - 6.0).abs() < 1e-9, "nn {nn}");
        }
    }

    #[test]
    fn jitter_bounded_and_seeded() {
        let fov = circular_fov(60, 60, 0.0).unwrap();
        let p = LatticeParams { spacing: 4.0, jitter: 0.3, seed: 5 };
        let a = generate_layout(60, 60, &p, &fov).unwrap();
        let b = generate_layout(60, 60, &p, &fov).unwrap();
        assert_eq!(a.fibres(), b.fibres());
        assert_eq!(a.hash(), b.hash());
        let c = generate_layout(60, 60, &LatticeParams { seed: 6, ..p }, &fov).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn bad_params() {
        let fov = Mask::full(20, 20);
        assert!(generate_layout(20, 20, &LatticeParams { spacing: 1.0, jitter: 0.0, seed: 0 }, &fov).is_err());
        assert!(generate_layout(20, 20, &LatticeParams { spacing: 3.0, jitter: 0.6, seed: 0 }, &fov).is_err());
        // FoV so small nothing survives
        let tiny = circular_fov(20, 20, 9.5).unwrap();
        assert!(matches!(
            generate_layout(20, 20, &LatticeParams { spacing: 8.0, jitter: 0.0, seed: 0 }, &tiny),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn three_fibres_one_triangle() {
        let l = FibreLayout::from_positions(10, 10, vec![(1.0, 1.0), (8.0, 1.0), (4.0, 7.0)], Mask::full(10, 10)).unwrap();
        assert_eq!(l.triangles().len(), 1);
    }

    #[test]
    fn duplicates_and_out_of_frame() {
        let full = Mask::full(10, 10);
        let dup = FibreLayout::from_positions(10, 10, vec![(1.0, 1.0), (8.0, 1.0), (1.0, 1.0), (4.0, 7.0)], full.clone());
        assert!(matches!(dup, Err(Error::Layout(m)) if m.contains("share")));
        assert!(FibreLayout::from_positions(10, 10, vec![(1.0, 1.0), (12.0, 1.0), (4.0, 7.0)], full.clone()).is_err());
        assert!(FibreLayout::from_positions(10, 10, vec![(1.0, 1.0), (8.0, 1.0)], full).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let fov = circular_fov(50, 40, 1.0).unwrap();
        let l = generate_layout(50, 40, &LatticeParams { spacing: 3.3, jitter: 0.45, seed: 77 }, &fov).unwrap();
        let p = dir.path().join("layout.csv");
        l.save(&p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("fibre_id,x,y\n"));
        let back = load_layout(&p, 50, 40, &fov).unwrap();
        assert_eq!(back.fibres(), l.fibres());
        assert_eq!(back.triangles(), l.triangles());
        assert_eq!(back.cells(), l.cells());
        assert_eq!(back.hash(), l.hash());
    }
}
