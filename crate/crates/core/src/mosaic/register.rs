//! Translation estimation by phase correlation.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::RigidTransform;
use crate::imagecore::{shift_lanczos, Image, Mask};
use crate::spectral::{fft2, next_fast_len};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationParams {
    /// Width in pixels of the cosine ramp that fades each frame to zero at
    /// the FoV and frame border. 0 disables apodization.
    pub taper: f64,
    /// Gaussian smoothing (pixels) applied to the correlation surface so the
    /// peak is well sampled by the quadratic fit. 0 keeps the raw surface.
    pub peak_sigma: f64,
    /// Re-estimation passes after resampling the moving frame by the
    /// current estimate. Each pass removes most of the pull of the shared
    /// apodization window towards zero shift.
    pub refine_iterations: usize,
    /// Spectral normalization exponent used in the refinement passes: the
    /// cross-power spectrum is divided by its magnitude to this power. The
    /// coarse pass always uses 1 (classic phase correlation); 0 turns the
    /// refinement into plain cross-correlation, which is less noise-sensitive.
    pub refine_whitening: f64,
    /// Gauss-Newton steps on the sum of squared differences over the common
    /// support, run after the correlation passes.
    #[serde(default = "default_polish")]
    pub polish_iterations: usize,
}

fn default_polish() -> usize {
    10
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self { taper: 8.0, peak_sigma: 1.0, refine_iterations: 20, refine_whitening: 0.0, polish_iterations: default_polish() }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.taper >= 0.0 && self.taper.is_finite()) {
            return Err(Error::InvalidParameter(format!("taper {} must be >= 0", self.taper)));
        }
        if !(self.peak_sigma >= 0.0 && self.peak_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("peak_sigma {} must be >= 0", self.peak_sigma)));
        }
        if !(0.0..=1.0).contains(&self.refine_whitening) {
            return Err(Error::InvalidParameter(format!("refine_whitening {} must lie in [0, 1]", self.refine_whitening)));
        }
        Ok(())
    }
}

/// Chamfer distance from each pixel to the nearest pixel outside the FoV,
/// with everything beyond the frame border counted as outside.
fn inside_distance(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let big = (w + h) as f64;
    let mut d: Vec<f64> = (0..w * h).map(|i| if img.in_fov_index(i) { big } else { 0.0 }).collect();
    let at = |d: &[f64], x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            d[y as usize * w + x as usize]
        }
    };
    let diag = std::f64::consts::SQRT_2;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            if d[i] == 0.0 {
                continue;
            }
            let v = (at(&d, x - 1, y) + 1.0)
                .min(at(&d, x, y - 1) + 1.0)
                .min(at(&d, x - 1, y - 1) + diag)
                .min(at(&d, x + 1, y - 1) + diag);
            d[i] = d[i].min(v);
        }
    }
    for y in (0..h as isize).rev() {
        for x in (0..w as isize).rev() {
            let i = y as usize * w + x as usize;
            if d[i] == 0.0 {
                continue;
            }
            let v = (at(&d, x + 1, y) + 1.0)
                .min(at(&d, x, y + 1) + 1.0)
                .min(at(&d, x + 1, y + 1) + diag)
                .min(at(&d, x - 1, y + 1) + diag);
            d[i] = d[i].min(v);
        }
    }
    d
}

fn prepare(img: &Image, taper: f64, pw: usize, ph: usize, what: &str) -> Result<Vec<Complex64>> {
    let mean = img.fov_mean().ok_or_else(|| Error::Empty(format!("{what} frame has no in-FoV pixels")))?;
    let (lo, hi) = img.fov_values().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo <= 0.0 {
        return Err(Error::Degenerate(format!("{what} frame is constant inside the FoV")));
    }
    let dist = if taper > 0.0 { Some(inside_distance(img)) } else { None };
    let (w, h) = (img.width(), img.height());
    let mut buf = vec![Complex64::default(); pw * ph];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !img.in_fov_index(i) {
                continue;
            }
            let wgt = match &dist {
                Some(d) if d[i] < taper => 0.5 - 0.5 * (std::f64::consts::PI * d[i] / taper).cos(),
                _ => 1.0,
            };
            buf[y * pw + x] = Complex64::new((img.data()[i] - mean) * wgt, 0.0);
        }
    }
    Ok(buf)
}

fn signed_freq(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n = n as f64;
    if k > n / 2.0 {
        (k - n) / n
    } else {
        k / n
    }
}

/// Offset of the maximum of a quadratic fitted by least squares to the 3x3
/// samples `f[v+1][u+1]`.
fn quadratic_peak(f: [[f64; 3]; 3]) -> (f64, f64) {
    let (mut b, mut c, mut e, mut pa, mut pg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (j, row) in f.iter().enumerate() {
        let v = j as f64 - 1.0;
        for (i, &val) in row.iter().enumerate() {
            let u = i as f64 - 1.0;
            b += u * val;
            c += v * val;
            e += u * v * val;
            pa += (u * u - 2.0 / 3.0) * val;
            pg += (v * v - 2.0 / 3.0) * val;
        }
    }
    let (b, c, e, a, g) = (b / 6.0, c / 6.0, e / 4.0, pa / 2.0, pg / 2.0);
    let det = 4.0 * a * g - e * e;
    if a < 0.0 && det > 0.0 {
        let u = (-b * 2.0 * g + c * e) / det;
        let v = (-c * 2.0 * a + b * e) / det;
        if u.abs() <= 1.0 && v.abs() <= 1.0 {
            return (u, v);
        }
    }
    // Separable three-point parabolas as a fallback.
    let para = |m: f64, z: f64, p: f64| {
        let den = 2.0 * (2.0 * z - m - p);
        if den > 0.0 {
            ((p - m) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    (para(f[1][0], f[1][1], f[1][2]), para(f[0][1], f[1][1], f[2][1]))
}

/// Translation `d` such that `moving(q) ≈ fixed(q - d)`: phase correlation
/// with a quadratic fit around the integer peak, then re-estimation of the
/// residual shift after resampling `moving` by the running estimate.
pub fn estimate_translation(fixed: &Image, moving: &Image, params: &RegistrationParams) -> Result<RigidTransform> {
    params.validate()?;
    fixed.check_same_shape(moving)?;
    let mut d = correlate(fixed, moving, params.peak_sigma, params.taper, 1.0)?;
    let filled = moving.fill_outside_with_mean();
    for _ in 0..params.refine_iterations {
        // Compare both frames over the same support so the shared window
        // and border cannot bias the residual estimate.
        let Some(common) = common_support(fixed, moving, d)? else { break };
        let mut back = shift_lanczos(&filled, -d.dx, -d.dy);
        back.set_fov(Some(common.clone()))?;
        let mut f = fixed.clone();
        f.set_fov(Some(common))?;
        let r = match correlate(&f, &back, params.peak_sigma, params.taper, params.refine_whitening) {
            Ok(r) => r,
            Err(_) => break,
        };
        d.dx += r.dx;
        d.dy += r.dy;
        if r.dx.abs().max(r.dy.abs()) < 1e-3 {
            break;
        }
    }
    for _ in 0..params.polish_iterations {
        let Some(step) = gauss_newton_step(fixed, moving, &filled, d)? else { break };
        if step.0.abs().max(step.1.abs()) > 1.0 {
            break;
        }
        d.dx += step.0;
        d.dy += step.1;
        if step.0.abs().max(step.1.abs()) < 1e-4 {
            break;
        }
    }
    Ok(d)
}

/// Least-squares update of `d` from the linearized difference between
/// `fixed` and `moving` resampled by `-d`, using the mean of both gradients.
fn gauss_newton_step(fixed: &Image, moving: &Image, filled: &Image, d: RigidTransform) -> Result<Option<(f64, f64)>> {
    let Some(common) = common_support(fixed, moving, d)? else { return Ok(None) };
    let back = shift_lanczos(filled, -d.dx, -d.dy);
    let (w, h) = (fixed.width(), fixed.height());
    let (f, b) = (fixed.data(), back.data());
    let ok = |x: usize, y: usize| common.get(x, y);
    let (mut sxx, mut sxy, mut syy, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            if !(ok(x, y) && ok(x - 1, y) && ok(x + 1, y) && ok(x, y - 1) && ok(x, y + 1)) {
                continue;
            }
            let i = y * w + x;
            let gx = 0.25 * (f[i + 1] - f[i - 1] + b[i + 1] - b[i - 1]);
            let gy = 0.25 * (f[i + w] - f[i - w] + b[i + w] - b[i - w]);
            let e = b[i] - f[i];
            sxx += gx * gx;
            sxy += gx * gy;
            syy += gy * gy;
            bx += gx * e;
            by += gy * e;
        }
    }
    let det = sxx * syy - sxy * sxy;
    if !(det > 1e-12 * (sxx + syy).powi(2)) || det == 0.0 {
        return Ok(None);
    }
    // back(q) = fixed(q - delta) ≈ fixed(q) - delta·g, so delta = -(G^-1) Σ g e.
    let ux = -(syy * bx - sxy * by) / det;
    let uy = -(sxx * by - sxy * bx) / det;
    Ok(Some((ux, uy)))
}

/// Pixels `q` in the fixed FoV whose resampling footprint around `q + d` in
/// the moving frame lies inside its FoV. `None` if fewer than 16 remain.
fn common_support(fixed: &Image, moving: &Image, d: RigidTransform) -> Result<Option<Mask>> {
    let (w, h) = (fixed.width() as i64, fixed.height() as i64);
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && moving.in_fov(x as usize, y as usize);
    let mut bits = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            if !fixed.in_fov(x as usize, y as usize) {
                continue;
            }
            let (x0, y0) = ((x as f64 + d.dx).floor() as i64, (y as f64 + d.dy).floor() as i64);
            bits[(y * w + x) as usize] =
                inside(x0 - 2, y0 - 2) && inside(x0 + 3, y0 - 2) && inside(x0 - 2, y0 + 3) && inside(x0 + 3, y0 + 3);
        }
    }
    if bits.iter().filter(|&&b| b).count() < 16 {
        return Ok(None);
    }
    Mask::new(w as usize, h as usize, bits).map(Some)
}

fn correlate(fixed: &Image, moving: &Image, peak_sigma: f64, taper: f64, whitening: f64) -> Result<RigidTransform> {
    let (w, h) = (fixed.width(), fixed.height());
    let (pw, ph) = (next_fast_len(w), next_fast_len(h));
    let mut a = prepare(fixed, taper, pw, ph, "fixed")?;
    let mut b = prepare(moving, taper, pw, ph, "moving")?;
    fft2(&mut a, pw, ph, false);
    fft2(&mut b, pw, ph, false);

    let cross: Vec<Complex64> = b.iter().zip(&a).map(|(m, f)| m * f.conj()).collect();
    let peak_mag = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = peak_mag * 1e-12;
    let s2 = 2.0 * std::f64::consts::PI.powi(2) * peak_sigma * peak_sigma;
    let mut r = cross;
    for ky in 0..ph {
        let fy = signed_freq(ky, ph);
        for kx in 0..pw {
            let fx = signed_freq(kx, pw);
            let c = &mut r[ky * pw + kx];
            let n = c.norm();
            *c = if n > floor { *c / n.powf(whitening) * (-s2 * (fx * fx + fy * fy)).exp() } else { Complex64::default() };
        }
    }
    fft2(&mut r, pw, ph, true);

    let (mut best, mut bi) = (f64::NEG_INFINITY, 0);
    for (i, c) in r.iter().enumerate() {
        if c.re > best {
            best = c.re;
            bi = i;
        }
    }
    let (px, py) = ((bi % pw) as isize, (bi / pw) as isize);
    let mut f = [[0.0; 3]; 3];
    for (j, row) in f.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            let x = (px + i as isize - 1).rem_euclid(pw as isize) as usize;
            let y = (py + j as isize - 1).rem_euclid(ph as isize) as usize;
            *v = r[y * pw + x].re;
        }
    }
    let (mut u, mut v) = quadratic_peak(f);
    // Sub-nanopixel offsets are round-off from a symmetric peak.
    if u.abs() < 1e-9 {
        u = 0.0;
    }
    if v.abs() < 1e-9 {
        v = 0.0;
    }
    let wrap = |p: isize, n: usize| if p as usize > n / 2 { p - n as isize } else { p };
    let dx = wrap(px, pw) as f64 + u;
    let dy = wrap(py, ph) as f64 + v;
    Ok(RigidTransform { dx, dy })
}
