//! Training-free enhancement baselines: Wiener deconvolution with a Gaussian
//! PSF and unsharp-mask sharpening.

mod tune;

pub use tune::{tune_sharpen, tune_wiener_nsr, TuneResult};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::imagecore::Image;
use crate::spectral::{fft2, next_fast_len, reflect, to_complex};
use crate::{Error, Result};

/// How the frame is extended before frequency-domain filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Mirror-pad by the PSF radius, then up to an FFT-friendly size; crop after.
    #[default]
    Symmetric,
    /// Treat the frame as one period (no padding).
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerParams {
    pub psf_sigma: f64,
    /// Noise-to-signal power ratio.
    pub nsr: f64,
    /// Kernel truncation radius in units of `psf_sigma`.
    pub psf_support: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Default for WienerParams {
    fn default() -> Self {
        Self { psf_sigma: 2.0, nsr: 0.01, psf_support: 4.0, boundary: Boundary::Symmetric }
    }
}

impl WienerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.psf_sigma > 0.0) || !self.psf_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("psf_sigma {} must be > 0", self.psf_sigma)));
        }
        if !(self.nsr >= 0.0) {
            return Err(Error::InvalidParameter(format!("nsr {} must be >= 0", self.nsr)));
        }
        if !(self.psf_support > 0.0) {
            return Err(Error::InvalidParameter(format!("psf_support {} must be > 0", self.psf_support)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpenParams {
    /// Gaussian blur sigma in pixels.
    pub radius: f64,
    pub amount: f64,
    pub clamp: bool,
}

impl Default for SharpenParams {
    fn default() -> Self {
        Self { radius: 1.5, amount: 1.0, clamp: true }
    }
}

impl SharpenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!("sharpen radius {} must be > 0", self.radius)));
        }
        if !(self.amount >= 0.0) || !self.amount.is_finite() {
            return Err(Error::InvalidParameter(format!("sharpen amount {} must be >= 0", self.amount)));
        }
        Ok(())
    }
}

/// Normalized 1-D Gaussian taps of radius `ceil(support * sigma)`.
pub fn gaussian_taps(sigma: f64, support: f64) -> Vec<f64> {
    let r = (support * sigma).ceil() as isize;
    let g: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with mirrored edges.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let taps = gaussian_taps(sigma, 3.0);
    let r = (taps.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * src[y * w + reflect(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = img.clone();
    let dst = out.data_mut();
    for y in 0..h {
        for x in 0..w {
            dst[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn zero_outside(img: &mut Image) {
    if let Some(m) = img.fov().cloned() {
        for (v, &inside) in img.data_mut().iter_mut().zip(m.bits()) {
            if !inside {
                *v = 0.0;
            }
        }
    }
}

/// Transfer function of the truncated, normalized Gaussian PSF on a
/// `w`x`h` periodic grid.
pub fn gaussian_otf(sigma: f64, support: f64, w: usize, h: usize) -> Vec<Complex64> {
    let taps = gaussian_taps(sigma, support);
    let r = (taps.len() / 2) as isize;
    let mut k = vec![Complex64::default(); w * h];
    for (j, ty) in taps.iter().enumerate() {
        for (i, tx) in taps.iter().enumerate() {
            let x = (i as isize - r).rem_euclid(w as isize) as usize;
            let y = (j as isize - r).rem_euclid(h as isize) as usize;
            k[y * w + x] += Complex64::new(tx * ty, 0.0);
        }
    }
    fft2(&mut k, w, h, false);
    k
}

/// Frequency-domain Wiener filter `conj(H) / (|H|^2 + nsr)` for a Gaussian
/// PSF. Out-of-FoV pixels are filled with the in-FoV mean beforehand and set
/// to 0 in the output.
pub fn wiener_deconvolve(img: &Image, params: &WienerParams) -> Result<Image> {
    params.validate()?;
    let filled = img.fill_outside_with_mean();
    let (w, h) = (img.width(), img.height());
    let radius = (params.psf_support * params.psf_sigma).ceil() as usize;
    let (pw, ph, pad) = match params.boundary {
        Boundary::Periodic => (w, h, 0),
        Boundary::Symmetric => (next_fast_len(w + 2 * radius), next_fast_len(h + 2 * radius), radius),
    };
    let mut buf = vec![Complex64::default(); pw * ph];
    for y in 0..ph {
        let sy = reflect(y as isize - pad as isize, h);
        for x in 0..pw {
            let sx = reflect(x as isize - pad as isize, w);
            buf[y * pw + x] = Complex64::new(filled.get(sx, sy), 0.0);
        }
    }
    fft2(&mut buf, pw, ph, false);
    let otf = gaussian_otf(params.psf_sigma, params.psf_support, pw, ph);
    for (f, hh) in buf.iter_mut().zip(&otf) {
        let den = hh.norm_sqr() + params.nsr;
        *f = if den > 0.0 { *f * hh.conj() / den } else { Complex64::default() };
    }
    fft2(&mut buf, pw, ph, true);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, buf[(y + pad) * pw + x + pad].re);
        }
    }
    zero_outside(&mut out);
    Ok(out)
}

/// `in + amount * (in - blur(in))`, optionally clamped to [0,1].
pub fn unsharp_sharpen(img: &Image, params: &SharpenParams) -> Result<Image> {
    params.validate()?;
    let filled = img.fill_outside_with_mean();
    let blur = gaussian_blur(&filled, params.radius);
    let mut out = img.clone();
    for ((o, &v), &b) in out.data_mut().iter_mut().zip(filled.data()).zip(blur.data()) {
        let s = v + params.amount * (v - b);
        *o = if params.clamp { s.clamp(0.0, 1.0) } else { s };
    }
    zero_outside(&mut out);
    Ok(out)
}

/// Circular convolution with the same truncated Gaussian PSF used by
/// [`wiener_deconvolve`], evaluated in the frequency domain.
pub fn gaussian_blur_periodic(img: &Image, sigma: f64, support: f64) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut buf = to_complex(img.data());
    fft2(&mut buf, w, h, false);
    for (f, hh) in buf.iter_mut().zip(gaussian_otf(sigma, support, w, h)) {
        *f *= hh;
    }
    fft2(&mut buf, w, h, true);
    let mut out = img.clone();
    for (o, c) in out.data_mut().iter_mut().zip(&buf) {
        *o = c.re;
    }
    out
}
