use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{save_image, Image, Mask};
use crate::spectral::reflect;
use crate::{Error, Result};

/// Mask of the circle inscribed in the frame, shrunk by `margin` pixels.
///
/// A pixel is inside when its centre `(x + 0.5, y + 0.5)` lies within
/// `min(width, height) / 2 - margin` of the frame centre.
pub fn circular_fov(width: usize, height: usize, margin: f64) -> Result<Mask> {
    let half = width.min(height) as f64 / 2.0;
    if !(margin >= 0.0 && margin < half) {
        return Err(Error::InvalidParameter(format!(
            "FoV margin {margin} must lie in [0, {half})"
        )));
    }
    let r = half - margin;
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let mut bits = Vec::with_capacity(width * height);
    for y in 0..height {
        let dy = y as f64 + 0.5 - cy;
        for x in 0..width {
            let dx = x as f64 + 0.5 - cx;
            bits.push(dx * dx + dy * dy <= r * r);
        }
    }
    Mask::new(width, height, bits)
}

/// Dataset-level intensity statistics used for z-normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean_lr: f64,
    pub std_lr: f64,
}

impl NormalizationStats {
    pub fn new(mean_lr: f64, std_lr: f64) -> Result<Self> {
        if !(std_lr > 0.0) || !mean_lr.is_finite() || !std_lr.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "normalization needs finite mean and std > 0, got {mean_lr}, {std_lr}"
            )));
        }
        Ok(Self { mean_lr, std_lr })
    }
}

/// Mean and population standard deviation over the union of in-FoV pixels.
pub fn compute_lr_stats<'a>(images: impl IntoIterator<Item = &'a Image>) -> Result<NormalizationStats> {
    // Two passes for accuracy: mean first, then centred second moment.
    let images: Vec<&Image> = images.into_iter().collect();
    if images.is_empty() {
        return Err(Error::Empty("no images for statistics".into()));
    }
    let mut n = 0usize;
    let mut sum = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for img in &images {
        for v in img.fov_values() {
            sum += v;
            n += 1;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if n == 0 {
        return Err(Error::Empty("no in-FoV pixels for statistics".into()));
    }
    if lo == hi {
        return Err(Error::ZeroVariance(n));
    }
    let mean = sum / n as f64;
    let ss: f64 = images
        .iter()
        .flat_map(|img| img.fov_values())
        .map(|v| (v - mean) * (v - mean))
        .sum();
    let std = (ss / n as f64).sqrt();
    NormalizationStats::new(mean, std)
}

/// `(x - mean) / std` on in-FoV pixels; out-of-FoV pixels are set to 0.
pub fn normalize(img: &Image, stats: &NormalizationStats) -> Image {
    let mut out = img.map(|v| (v - stats.mean_lr) / stats.std_lr);
    zero_outside(&mut out);
    out
}

/// Inverse of [`normalize`].
pub fn denormalize(img: &Image, stats: &NormalizationStats) -> Image {
    let mut out = img.map(|v| v * stats.std_lr + stats.mean_lr);
    zero_outside(&mut out);
    out
}

fn zero_outside(img: &mut Image) {
    if let Some(mask) = img.fov().cloned() {
        for (v, &inside) in img.data_mut().iter_mut().zip(mask.bits()) {
            if !inside {
                *v = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rescaled {
    pub image: Image,
    /// Set when the in-FoV range was empty and the frame was mapped to 0.
    pub degenerate: bool,
}

/// Per-frame affine map of the in-FoV range onto [0,1].
pub fn rescale_unit(img: &Image) -> Rescaled {
    let (lo, hi) = img
        .fov_values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let degenerate = !(hi > lo);
    let mut image = if degenerate {
        log::warn!("rescale of a constant frame; mapping to 0");
        img.map(|_| 0.0)
    } else {
        let span = hi - lo;
        img.map(|v| (v - lo) / span)
    };
    zero_outside(&mut image);
    Rescaled { image, degenerate }
}

/// Which grid tiles are kept by [`extract_patches`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchPolicy {
    /// Every pixel of the tile is in the FoV.
    FullFov,
    /// At least this fraction of the tile's pixels is in the FoV.
    MinFraction(f64),
}

impl Default for PatchPolicy {
    fn default() -> Self {
        PatchPolicy::MinFraction(0.5)
    }
}

#[derive(Debug, Clone)]
pub struct Patch {
    pub origin: (usize, usize),
    pub size: usize,
    pub data: Image,
}

/// Non-overlapping `size`x`size` tiles on a grid anchored at (0,0); partial
/// tiles at the right and bottom edges are dropped.
pub fn extract_patches(img: &Image, size: usize, policy: PatchPolicy) -> Result<Vec<Patch>> {
    if size == 0 || size > img.width().min(img.height()) {
        return Err(Error::InvalidParameter(format!(
            "patch size {size} does not fit a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let mut out = Vec::new();
    for ty in 0..img.height() / size {
        for tx in 0..img.width() / size {
            let (x0, y0) = (tx * size, ty * size);
            let inside = (y0..y0 + size)
                .flat_map(|y| (x0..x0 + size).map(move |x| (x, y)))
                .filter(|&(x, y)| img.in_fov(x, y))
                .count();
            let total = size * size;
            let keep = match policy {
                PatchPolicy::FullFov => inside == total,
                PatchPolicy::MinFraction(f) => inside as f64 >= f * total as f64 && inside > 0,
            };
            if keep {
                out.push(Patch { origin: (x0, y0), size, data: img.crop(x0, y0, size, size)? });
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct PatchRow<'a> {
    patch_id: &'a str,
    source: &'a str,
    origin_x: usize,
    origin_y: usize,
}

/// Writes patches as `<dir>/<patch_id>.png` (16-bit) and appends rows to
/// `<dir>/patches.csv` (`patch_id,source,origin_x,origin_y`).
pub fn write_patches(dir: &Path, source: &str, patches: &[Patch]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Write { path: dir.to_path_buf(), source: e })?;
    let manifest = dir.join("patches.csv");
    let exists = manifest.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&manifest)
        .map_err(|e| Error::Write { path: manifest.clone(), source: e })?;
    let mut w = csv::WriterBuilder::new().has_headers(!exists).from_writer(file);
    let stem = Path::new(source)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(source);
    for p in patches {
        let id = format!("{stem}_{}_{}", p.origin.0, p.origin.1);
        save_image(&p.data, dir.join(format!("{id}.png")), 16)?;
        w.serialize(PatchRow { patch_id: &id, source, origin_x: p.origin.0, origin_y: p.origin.1 })?;
    }
    w.flush().map_err(|e| Error::Write { path: manifest, source: e })?;
    Ok(())
}

fn lanczos(x: f64) -> f64 {
    const A: f64 = 3.0;
    if x == 0.0 {
        1.0
    } else if x.abs() >= A {
        0.0
    } else {
        let px = std::f64::consts::PI * x;
        A * px.sin() * (px / A).sin() / (px * px)
    }
}

fn lanczos_taps(frac: f64) -> [f64; 6] {
    let mut t = [0.0; 6];
    for (k, v) in t.iter_mut().enumerate() {
        *v = lanczos(frac - (k as f64 - 2.0));
    }
    let s: f64 = t.iter().sum();
    t.map(|v| v / s)
}

/// `out(x, y) = img(x - dx, y - dy)` by separable Lanczos-3 resampling with
/// mirrored edges. The result carries no FoV.
pub fn shift_lanczos(img: &Image, dx: f64, dy: f64) -> Image {
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let (ix, fx) = (dx.floor(), dx - dx.floor());
    let (iy, fy) = (dy.floor(), dy - dy.floor());
    // Sample position is x - dx = (x - ix - 1) + (1 - fx).
    let tx = lanczos_taps(1.0 - fx);
    let ty = lanczos_taps(1.0 - fy);
    let (ox, oy) = (-(ix as isize) - 1, -(iy as isize) - 1);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let base = x as isize + ox;
            tmp[y * w + x] = tx
                .iter()
                .enumerate()
                .map(|(k, t)| t * src[y * w + reflect(base + k as isize - 2, w)])
                .sum();
        }
    }
    let mut out = Image::filled(w, h, 0.0);
    let dst = out.data_mut();
    for y in 0..h {
        let base = y as isize + oy;
        for x in 0..w {
            dst[y * w + x] = ty
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(base + k as isize - 2, h) * w + x])
                .sum();
        }
    }
    out
}
