use serde::{Deserialize, Serialize};

use crate::imagecore::Image;
use crate::{Error, Result};

/// Gaussian-windowed SSIM parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 1.0 }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidParameter(format!("SSIM window {} must be odd and >= 3", self.window)));
        }
        if !(self.sigma > 0.0 && self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::InvalidParameter("SSIM sigma, k1, k2 and dynamic range must be > 0".into()));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|v| v / s).collect()
    }
}

/// Valid-mode separable filtering: output is `(w-n+1) x (h-n+1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + n]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * rows[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Per-window SSIM values for windows lying wholly inside both images' FoV,
/// in row-major window order.
pub fn ssim_values(a: &Image, b: &Image, params: &SsimParams) -> Result<Vec<f64>> {
    params.validate()?;
    let fov = a.joint_fov(b)?;
    let (w, h) = (a.width(), a.height());
    let n = params.window;
    if w < n || h < n {
        return Err(Error::Degenerate(format!("{w}x{h} image is smaller than the {n}x{n} SSIM window")));
    }
    let taps = params.taps();
    let (xa, xb) = (a.data(), b.data());
    let prod = |f: &dyn Fn(usize) -> f64| (0..w * h).map(f).collect::<Vec<f64>>();
    let mu_a = filter_valid(xa, w, h, &taps);
    let mu_b = filter_valid(xb, w, h, &taps);
    let e_aa = filter_valid(&prod(&|i| xa[i] * xa[i]), w, h, &taps);
    let e_bb = filter_valid(&prod(&|i| xb[i] * xb[i]), w, h, &taps);
    let e_ab = filter_valid(&prod(&|i| xa[i] * xb[i]), w, h, &taps);

    // Windows touching a masked pixel are skipped; counted with a summed-area table.
    let ow = w + 1 - n;
    let valid: Box<dyn Fn(usize, usize) -> bool> = match &fov {
        None => Box::new(|_, _| true),
        Some(m) => {
            let mut sat = vec![0u32; (w + 1) * (h + 1)];
            for y in 0..h {
                for x in 0..w {
                    let out = (!m.get(x, y)) as u32;
                    sat[(y + 1) * (w + 1) + x + 1] = out + sat[y * (w + 1) + x + 1] + sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
                }
            }
            Box::new(move |x, y| {
                let s = |xx: usize, yy: usize| sat[yy * (w + 1) + xx];
                s(x + n, y + n) + s(x, y) == s(x + n, y) + s(x, y + n)
            })
        }
    };

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let mut out = Vec::new();
    for y in 0..h + 1 - n {
        for x in 0..ow {
            if !valid(x, y) {
                continue;
            }
            let i = y * ow + x;
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            out.push(num / den);
        }
    }
    if out.is_empty() {
        return Err(Error::Degenerate("no SSIM window lies fully inside the field of view".into()));
    }
    Ok(out)
}

/// Mean SSIM over all valid windows.
pub fn ssim(a: &Image, b: &Image, params: &SsimParams) -> Result<f64> {
    let v = ssim_values(a, b, params)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}
