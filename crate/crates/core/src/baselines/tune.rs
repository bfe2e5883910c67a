//! Grid-search calibration of baseline parameters on (input, reference)
//! pairs, maximizing mean SSIM against the reference.

use super::{unsharp_sharpen, wiener_deconvolve, SharpenParams, WienerParams};
use crate::imagecore::Image;
use crate::iqa::{ssim, SsimParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult<P> {
    pub params: P,
    pub mean_ssim: f64,
}

fn mean_ssim(pairs: &[(Image, Image)], f: impl Fn(&Image) -> Result<Image>, sp: &SsimParams) -> Result<f64> {
    let mut total = 0.0;
    for (input, reference) in pairs {
        total += ssim(&f(input)?, reference, sp)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Picks the `nsr` from `candidates` giving the best mean SSIM.
pub fn tune_wiener_nsr(pairs: &[(Image, Image)], base: &WienerParams, candidates: &[f64], sp: &SsimParams) -> Result<TuneResult<WienerParams>> {
    if pairs.is_empty() || candidates.is_empty() {
        return Err(Error::Empty("tuning needs pairs and candidates".into()));
    }
    let mut best: Option<TuneResult<WienerParams>> = None;
    for &nsr in candidates {
        let p = WienerParams { nsr, ..*base };
        let s = mean_ssim(pairs, |i| wiener_deconvolve(i, &p), sp)?;
        if best.as_ref().is_none_or(|b| s > b.mean_ssim) {
            best = Some(TuneResult { params: p, mean_ssim: s });
        }
    }
    Ok(best.expect("candidates non-empty"))
}

/// Picks `(radius, amount)` from the grid giving the best mean SSIM.
pub fn tune_sharpen(pairs: &[(Image, Image)], radii: &[f64], amounts: &[f64], sp: &SsimParams) -> Result<TuneResult<SharpenParams>> {
    if pairs.is_empty() || radii.is_empty() || amounts.is_empty() {
        return Err(Error::Empty("tuning needs pairs and candidates".into()));
    }
    let mut best: Option<TuneResult<SharpenParams>> = None;
    for &radius in radii {
        for &amount in amounts {
            let p = SharpenParams { radius, amount, clamp: true };
            let s = mean_ssim(pairs, |i| unsharp_sharpen(i, &p), sp)?;
            if best.as_ref().is_none_or(|b| s > b.mean_ssim) {
                best = Some(TuneResult { params: p, mean_ssim: s });
            }
        }
    }
    Ok(best.expect("grid non-empty"))
}
