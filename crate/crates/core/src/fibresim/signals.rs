use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FibreLayout;
use crate::imagecore::Image;
use crate::{Error, Result};

/// Per-fibre intensities, indexed like [`FibreLayout::fibres`].
#[derive(Debug, Clone, PartialEq)]
pub struct FibreSignals {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    /// Mean over the fibre's Voronoi cell.
    #[default]
    VoronoiAverage,
    /// Mean over the seven grid pixels closest to the fibre centre.
    SevenPixelAverage,
}

impl std::str::FromStr for ExtractionMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "voronoi_average" | "voronoi" => Ok(Self::VoronoiAverage),
            "seven_pixel_average" | "seven_pixel" => Ok(Self::SevenPixelAverage),
            other => Err(format!("unknown extraction mode `{other}` (voronoi_average | seven_pixel_average)")),
        }
    }
}

impl std::fmt::Display for ExtractionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::VoronoiAverage => "voronoi_average",
            Self::SevenPixelAverage => "seven_pixel_average",
        })
    }
}

/// Multiplicative and additive Gaussian noise on fibre signals:
/// `nfs = (1 + m) * fs + a`, `m ~ N(0, sigma_mult^2)`,
/// `a ~ N(0, (sigma_add_rel * (max fs - min fs))^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_mult: f64,
    pub sigma_add_rel: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma_mult: 0.05, sigma_add_rel: 0.01, seed: 0 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { sigma_mult: 0.0, sigma_add_rel: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_mult >= 0.0) || !self.sigma_mult.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma_mult {} must be >= 0", self.sigma_mult)));
        }
        if !(self.sigma_add_rel >= 0.0) || !self.sigma_add_rel.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma_add_rel {} must be >= 0", self.sigma_add_rel)));
        }
        Ok(())
    }
}

pub fn extract_signals(hr: &Image, layout: &FibreLayout, mode: ExtractionMode) -> Result<FibreSignals> {
    if hr.width() != layout.width() || hr.height() != layout.height() {
        return Err(Error::Dimensions(format!(
            "image {}x{} vs layout {}x{}",
            hr.width(),
            hr.height(),
            layout.width(),
            layout.height()
        )));
    }
    let data = hr.data();
    let mut values = Vec::with_capacity(layout.len());
    match mode {
        ExtractionMode::VoronoiAverage => {
            for (i, cell) in layout.cells().iter().enumerate() {
                let (sum, n) = cell
                    .iter()
                    .filter(|&&p| hr.in_fov_index(p))
                    .fold((0.0, 0usize), |(s, n), &p| (s + data[p], n + 1));
                if n == 0 {
                    return Err(Error::EmptyCell(i));
                }
                values.push(sum / n as f64);
            }
        }
        ExtractionMode::SevenPixelAverage => {
            for (i, &pos) in layout.fibres().iter().enumerate() {
                let (sum, n) = seven_nearest_pixels(pos, hr.width(), hr.height())
                    .into_iter()
                    .filter(|&p| hr.in_fov_index(p) && layout.fov().bits()[p])
                    .fold((0.0, 0usize), |(s, n), p| (s + data[p], n + 1));
                if n == 0 {
                    return Err(Error::EmptyCell(i));
                }
                values.push(sum / n as f64);
            }
        }
    }
    Ok(FibreSignals { values })
}

/// Row-major indices of the seven grid pixels nearest to `pos`, ordered by
/// (squared distance, y, x).
pub fn seven_nearest_pixels(pos: (f64, f64), width: usize, height: usize) -> Vec<usize> {
    // The 7th-nearest lattice point is never more than 2 pixels away, so a
    // +-3 window around the rounded position is enough.
    let (rx, ry) = (pos.0.round() as isize, pos.1.round() as isize);
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(49);
    for y in (ry - 3).max(0)..=(ry + 3).min(height as isize - 1) {
        for x in (rx - 3).max(0)..=(rx + 3).min(width as isize - 1) {
            let (dx, dy) = (x as f64 - pos.0, y as f64 - pos.1);
            cand.push((dx * dx + dy * dy, y as usize, x as usize));
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    cand.into_iter().take(7).map(|(_, y, x)| y * width + x).collect()
}

pub fn add_noise(fs: &FibreSignals, model: &NoiseModel) -> Result<FibreSignals> {
    model.validate()?;
    if fs.values.is_empty() {
        return Err(Error::Empty("no fibre signals".into()));
    }
    if model.sigma_mult == 0.0 && model.sigma_add_rel == 0.0 {
        return Ok(fs.clone());
    }
    let (lo, hi) = fs
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let sigma_add = model.sigma_add_rel * (hi - lo);
    let mult = Normal::new(0.0, model.sigma_mult).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let add = Normal::new(0.0, sigma_add).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let values = fs
        .values
        .iter()
        .map(|&v| {
            let m = mult.sample(&mut rng);
            let a = add.sample(&mut rng);
            (1.0 + m) * v + a
        })
        .collect();
    Ok(FibreSignals { values })
}
