//! Synthetic frame sequences with a known trajectory, for exercising the
//! registration and fusion path without real video.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FrameSequence, RigidTransform};
use crate::imagecore::{shift_lanczos, Image, Mask};
use crate::{Error, Result};

/// Deterministic band-limited texture in roughly [0.1, 0.9]: a sum of
/// random Gaussian blobs over a slow gradient.
pub fn smooth_texture(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 12 + (width * height) / 150;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(2.0..9.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let (gx, gy) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let raw = Image::from_fn(width, height, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let mut v = gx * x / width as f64 + gy * y / height as f64;
        for &(cx, cy, r, a) in &blobs {
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            v += a * (-d2 / (2.0 * r * r)).exp();
        }
        v
    });
    let (lo, hi) = raw.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    raw.map(|v| 0.1 + 0.8 * (v - lo) / (hi - lo).max(1e-12))
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub sequence: FrameSequence,
    /// Noise-free frames, same geometry as `sequence`.
    pub clean: Vec<Image>,
    /// True frame-to-canvas transform of each frame, frame 0 at the origin.
    pub truth: Vec<RigidTransform>,
    /// Top-left of frame 0 in source coordinates.
    pub origin: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub frames: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    /// Maximum displacement between consecutive frames in pixels.
    pub step: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Crops `frames` windows from `source` along a random walk with uniformly
/// distributed subpixel steps, adding i.i.d. Gaussian noise to each.
pub fn random_walk_sequence(source: &Image, params: &WalkParams, fov: Option<&Mask>) -> Result<SyntheticSequence> {
    let (fw, fh) = (params.frame_width, params.frame_height);
    let margin = 4.0;
    let room_x = source.width() as f64 - fw as f64 - 2.0 * margin;
    let room_y = source.height() as f64 - fh as f64 - 2.0 * margin;
    if room_x < 0.0 || room_y < 0.0 {
        return Err(Error::Dimensions(format!(
            "source {}x{} too small for {fw}x{fh} frames",
            source.width(),
            source.height()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let start = (margin + room_x / 2.0, margin + room_y / 2.0);
    let mut pos = vec![start];
    while pos.len() < params.frames {
        let &(px, py) = pos.last().expect("non-empty");
        loop {
            let r = params.step * rng.random::<f64>().sqrt();
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let (nx, ny) = (px + r * th.cos(), py + r * th.sin());
            if (margin..=margin + room_x).contains(&nx) && (margin..=margin + room_y).contains(&ny) {
                pos.push((nx, ny));
                break;
            }
        }
    }
    let noise = Normal::new(0.0, params.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut clean = Vec::new();
    let mut frames = Vec::new();
    for &(px, py) in &pos {
        let (ix, iy) = (px.floor(), py.floor());
        // frame(q) = source(q + p): shift left/up by the fractional part, then crop.
        let shifted = shift_lanczos(source, -(px - ix), -(py - iy));
        let mut c = shifted.crop(ix as usize, iy as usize, fw, fh)?;
        if let Some(m) = fov {
            c = c.with_fov(m.clone())?.fill_outside(0.0);
        }
        let mut n = c.clone();
        for (i, v) in n.data_mut().iter_mut().enumerate() {
            if c.in_fov_index(i) {
                *v += noise.sample(&mut rng);
            }
        }
        clean.push(c);
        frames.push(n);
    }
    let truth = pos.iter().map(|&(x, y)| RigidTransform { dx: x - start.0, dy: y - start.1 }).collect();
    Ok(SyntheticSequence { sequence: FrameSequence::new("synthetic", frames)?, clean, truth, origin: start })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_is_deterministic() {
        let src = smooth_texture(96, 96, 3);
        let p = WalkParams { frames: 5, frame_width: 48, frame_height: 48, step: 3.0, noise_sigma: 0.02, seed: 9 };
        let a = random_walk_sequence(&src, &p, None).unwrap();
        let b = random_walk_sequence(&src, &p, None).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.sequence.frames()[4].data(), b.sequence.frames()[4].data());
        assert_eq!(a.truth[0], RigidTransform { dx: 0.0, dy: 0.0 });
    }
}
