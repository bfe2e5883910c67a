//! Global Contrast Factor: a weighted sum of mean local contrasts measured on
//! a pyramid of superpixel resolutions, in a perceptual luminance space.

use serde::{Deserialize, Serialize};

use crate::imagecore::Image;
use crate::{Error, Result};

pub const DEFAULT_FACTORS: [usize; 9] = [1, 2, 4, 8, 16, 25, 50, 100, 200];

/// Level weight for level `i` of 9 (1-based).
pub fn default_weight(i: usize) -> f64 {
    let t = i as f64 / 9.0;
    (-0.406385 * t + 0.334573) * t + 0.0877526
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcfParams {
    /// Superpixel side length per level, finest first.
    pub factors: Vec<usize>,
    pub weights: Vec<f64>,
    pub gamma: f64,
}

impl Default for GcfParams {
    fn default() -> Self {
        Self {
            factors: DEFAULT_FACTORS.to_vec(),
            weights: (1..=9).map(default_weight).collect(),
            gamma: 2.2,
        }
    }
}

impl GcfParams {
    pub fn single_level() -> Self {
        Self { factors: vec![1], weights: vec![1.0], gamma: 2.2 }
    }

    pub fn levels(&self) -> usize {
        self.factors.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::InvalidParameter("GCF needs at least one level".into()));
        }
        if self.weights.len() != self.factors.len() {
            return Err(Error::InvalidParameter(format!(
                "{} GCF weights for {} levels",
                self.weights.len(),
                self.factors.len()
            )));
        }
        if self.factors.contains(&0) || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("GCF factors must be >= 1 and weights finite".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParameter("GCF gamma must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcfDetail {
    pub value: f64,
    /// Mean local contrast of each level that could be evaluated.
    pub level_contrasts: Vec<f64>,
    /// Levels skipped because the image is too small at that factor.
    pub truncated: usize,
}

/// Superpixel means over `f`x`f` blocks; a block is valid when at least half
/// of its pixels are in the FoV.
fn superpixels(img: &Image, f: usize) -> (usize, usize, Vec<Option<f64>>) {
    let (bw, bh) = (img.width() / f, img.height() / f);
    let mut out = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            let (mut s, mut n) = (0.0, 0usize);
            for y in by * f..(by + 1) * f {
                for x in bx * f..(bx + 1) * f {
                    if img.in_fov(x, y) {
                        s += img.get(x, y);
                        n += 1;
                    }
                }
            }
            out.push((n > 0 && 2 * n >= f * f).then(|| s / n as f64));
        }
    }
    (bw, bh, out)
}

/// Mean absolute difference to valid 4-neighbours, averaged over all
/// valid pixels that have at least one valid neighbour.
fn mean_local_contrast(w: usize, h: usize, lum: &[Option<f64>]) -> Option<f64> {
    let (mut total, mut count) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let Some(c) = lum[y * w + x] else { continue };
            let mut acc = 0.0;
            let mut k = 0;
            let mut visit = |xx: usize, yy: usize| {
                if let Some(v) = lum[yy * w + xx] {
                    acc += (c - v).abs();
                    k += 1;
                }
            };
            if x > 0 {
                visit(x - 1, y);
            }
            if x + 1 < w {
                visit(x + 1, y);
            }
            if y > 0 {
                visit(x, y - 1);
            }
            if y + 1 < h {
                visit(x, y + 1);
            }
            if k > 0 {
                total += acc / k as f64;
                count += 1;
            }
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Perceptual luminance `100 * sqrt(p^gamma)`; negative intensities are
/// treated as 0.
#[inline]
pub fn perceptual_luminance(p: f64, gamma: f64) -> f64 {
    100.0 * p.max(0.0).powf(gamma).sqrt()
}

pub fn gcf_detail(img: &Image, params: &GcfParams) -> Result<GcfDetail> {
    params.validate()?;
    let mut value = 0.0;
    let mut level_contrasts = Vec::new();
    let mut truncated = 0;
    for (&f, &wgt) in params.factors.iter().zip(&params.weights) {
        let (bw, bh, sp) = superpixels(img, f);
        let lum: Vec<Option<f64>> = sp.iter().map(|v| v.map(|p| perceptual_luminance(p, params.gamma))).collect();
        match (bw > 0 && bh > 0).then(|| mean_local_contrast(bw, bh, &lum)).flatten() {
            Some(c) => {
                value += wgt * c;
                level_contrasts.push(c);
            }
            None => truncated += 1,
        }
    }
    if level_contrasts.is_empty() {
        return Err(Error::Degenerate(format!(
            "{}x{} image has no level with two adjacent in-FoV superpixels",
            img.width(),
            img.height()
        )));
    }
    if truncated > 0 {
        log::warn!(
            "GCF on {}x{} image: {truncated} coarse level(s) skipped",
            img.width(),
            img.height()
        );
    }
    Ok(GcfDetail { value, level_contrasts, truncated })
}

pub fn gcf(img: &Image, params: &GcfParams) -> Result<f64> {
    gcf_detail(img, params).map(|d| d.value)
}

/// `gcf(a) - gcf(b)`.
pub fn delta_gcf(a: &Image, b: &Image, params: &GcfParams) -> Result<f64> {
    Ok(gcf(a, params)? - gcf(b, params)?)
}
