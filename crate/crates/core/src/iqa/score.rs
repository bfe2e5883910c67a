use serde::{Deserialize, Serialize};

use super::ssim::{ssim, SsimParams};
use crate::imagecore::Image;
use crate::{Error, Result};

/// Method-level inputs to the composite score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeInput {
    pub method: String,
    pub ssim_vs_hr: f64,
    pub dgcf_vs_lr: f64,
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
}

/// Composite score per method: the mean of min-max normalized SSIM-vs-HR and
/// min-max normalized GCF gain over LR, both normalized across exactly the
/// methods passed in. A factor with no spread contributes 0.5.
pub fn tot_cs(rows: &[CompositeInput]) -> Result<Vec<f64>> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "composite score needs at least 2 methods, got {}",
            rows.len()
        )));
    }
    if rows.iter().any(|r| !r.ssim_vs_hr.is_finite() || !r.dgcf_vs_lr.is_finite()) {
        return Err(Error::InvalidParameter("composite score inputs must be finite".into()));
    }
    let ns = min_max(rows.iter().map(|r| r.ssim_vs_hr));
    let ng = min_max(rows.iter().map(|r| r.dgcf_vs_lr));
    Ok(rows.iter().map(|r| (ns(r.ssim_vs_hr) + ng(r.dgcf_vs_lr)) / 2.0).collect())
}

/// `alpha * (1 - ssim(a, b)) + (1 - alpha) * mean|a - b|` over the joint FoV.
pub fn ssim_l1_score(a: &Image, b: &Image, alpha: f64, params: &SsimParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} must lie in [0,1]")));
    }
    let s = ssim(a, b, params)?;
    let fov = a.joint_fov(b)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        if fov.as_ref().is_none_or(|m| m.bits()[i]) {
            sum += (x - y).abs();
            n += 1;
        }
    }
    let l1 = sum / n as f64;
    Ok(alpha * (1.0 - s) + (1.0 - alpha) * l1)
}

/// Mixing weight used when none is configured.
pub const DEFAULT_SSIM_L1_ALPHA: f64 = 0.84;
