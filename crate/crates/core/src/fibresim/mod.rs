//! Synthetic low-resolution pCLE frames from high-resolution sources.
//!
//! A frame is sampled by a bundle of fibres: each fibre integrates the
//! high-resolution signal over its Voronoi cell, the per-fibre signals are
//! corrupted by multiplicative and additive Gaussian noise, and the frame is
//! rebuilt on the pixel grid by piecewise-linear interpolation over the
//! Delaunay triangulation of the fibre centres.

pub mod geometry;
mod layout;
mod signals;

pub use layout::{generate_layout, load_layout, FibreLayout, LatticeParams};
pub use signals::{add_noise, extract_signals, seven_nearest_pixels, ExtractionMode, FibreSignals, NoiseModel};

use serde::{Deserialize, Serialize};

use crate::imagecore::Image;
use crate::{Error, Result};

/// Interpolates fibre signals back onto the pixel grid.
///
/// In-hull pixels get the barycentric blend of their triangle's vertex
/// signals, in-FoV pixels outside the hull copy their nearest fibre, and
/// pixels outside the FoV are 0. The layout's FoV is attached to the output.
pub fn reconstruct(signals: &FibreSignals, layout: &FibreLayout) -> Result<Image> {
    if signals.values.len() != layout.len() {
        return Err(Error::Dimensions(format!(
            "{} signals for {} fibres",
            signals.values.len(),
            layout.len()
        )));
    }
    let (w, h) = (layout.width(), layout.height());
    let tris = layout.triangles();
    let v = &signals.values;
    let mut data = vec![0.0; w * h];
    for (i, px) in data.iter_mut().enumerate() {
        if let Some((t, b)) = layout.coverage(i) {
            let [a, c, d] = tris[t];
            *px = b[0] * v[a] + b[1] * v[c] + b[2] * v[d];
        } else if let Some(f) = layout.nearest_fibre(i) {
            *px = v[f];
        }
    }
    Image::new(w, h, data)?.with_fov(layout.fov().clone())
}

/// Provenance of a simulated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub layout_hash: String,
    pub seed: u64,
    pub sigma_mult: f64,
    pub sigma_add_rel: f64,
    pub mode: ExtractionMode,
}

#[derive(Debug, Clone)]
pub struct SimulatedFrame {
    pub image: Image,
    pub meta: SimulationMeta,
}

/// Full degradation pipeline: extract, add noise, reconstruct.
pub fn simulate_lr(hr: &Image, layout: &FibreLayout, model: &NoiseModel, mode: ExtractionMode) -> Result<SimulatedFrame> {
    let clean = extract_signals(hr, layout, mode)?;
    let noisy = add_noise(&clean, model)?;
    let image = reconstruct(&noisy, layout)?;
    Ok(SimulatedFrame {
        image,
        meta: SimulationMeta {
            layout_hash: layout.hash(),
            seed: model.seed,
            sigma_mult: model.sigma_mult,
            sigma_add_rel: model.sigma_add_rel,
            mode,
        },
    })
}
