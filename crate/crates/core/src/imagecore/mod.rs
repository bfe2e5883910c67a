//! Single-channel images with an optional field-of-view mask.
//!
//! Every stage of the pipeline exchanges [`Image`] values. Pixels outside the
//! field of view (FoV) are treated as absent: statistics, metrics and patch
//! extraction only ever read in-FoV pixels.

mod io;
mod ops;

pub use io::{load_image, load_mask, save_image, save_mask, BitDepthPolicy, SaveReport};
pub use ops::{
    circular_fov, compute_lr_stats, denormalize, extract_patches, normalize, rescale_unit,
    shift_lanczos, write_patches, NormalizationStats, Patch, PatchPolicy, Rescaled,
};

use crate::{Error, Result};

/// Binary mask, `true` = inside the field of view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimensions(format!(
                "mask has {} entries, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimensions("mask intersection of different sizes".into()));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Ok(Mask { width: self.width, height: self.height, bits })
    }
}

/// Row-major intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
    fov: Option<Mask>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions("image must be at least 1x1".into()));
        }
        if data.len() != width * height {
            return Err(Error::Dimensions(format!(
                "data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data, fov: None })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image must be at least 1x1");
        Self { width, height, data: vec![value; width * height], fov: None }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image must be at least 1x1");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data, fov: None }
    }

    pub fn with_fov(mut self, fov: Mask) -> Result<Self> {
        self.set_fov(Some(fov))?;
        Ok(self)
    }

    pub fn set_fov(&mut self, fov: Option<Mask>) -> Result<()> {
        if let Some(m) = &fov {
            if m.width != self.width || m.height != self.height {
                return Err(Error::Dimensions(format!(
                    "mask {}x{} does not match image {}x{}",
                    m.width, m.height, self.width, self.height
                )));
            }
        }
        self.fov = fov;
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn fov(&self) -> Option<&Mask> {
        self.fov.as_ref()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn in_fov(&self, x: usize, y: usize) -> bool {
        self.fov.as_ref().is_none_or(|m| m.get(x, y))
    }

    #[inline]
    pub fn in_fov_index(&self, i: usize) -> bool {
        self.fov.as_ref().is_none_or(|m| m.bits[i])
    }

    /// In-FoV pixel values in row-major order.
    pub fn fov_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(move |(i, _)| self.in_fov_index(*i))
            .map(|(_, v)| *v)
    }

    pub fn fov_count(&self) -> usize {
        self.fov.as_ref().map_or(self.data.len(), Mask::count)
    }

    /// Mean of the in-FoV pixels, `None` when the FoV is empty.
    pub fn fov_mean(&self) -> Option<f64> {
        let n = self.fov_count();
        (n > 0).then(|| self.fov_values().sum::<f64>() / n as f64)
    }

    /// Copy with out-of-FoV pixels replaced by `value`.
    pub fn fill_outside(&self, value: f64) -> Image {
        let mut out = self.clone();
        if let Some(m) = &self.fov {
            for (v, inside) in out.data.iter_mut().zip(&m.bits) {
                if !inside {
                    *v = value;
                }
            }
        }
        out
    }

    /// Copy with out-of-FoV pixels replaced by the in-FoV mean (0 when empty).
    pub fn fill_outside_with_mean(&self) -> Image {
        self.fill_outside(self.fov_mean().unwrap_or(0.0))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
            fov: self.fov.clone(),
        }
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimensions(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Mask that is the intersection of both images' FoVs (`None` = full).
    pub fn joint_fov(&self, other: &Image) -> Result<Option<Mask>> {
        self.check_same_shape(other)?;
        Ok(match (&self.fov, &other.fov) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(a.intersect(b)?),
        })
    }

    /// Rectangular crop; the FoV mask is cropped alongside.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Dimensions(format!(
                "crop {}x{}+{}+{} outside {}x{}",
                w, h, x0, y0, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        let mut bits = self.fov.as_ref().map(|_| Vec::with_capacity(w * h));
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
            if let (Some(bits), Some(m)) = (bits.as_mut(), &self.fov) {
                bits.extend_from_slice(&m.bits[row + x0..row + x0 + w]);
            }
        }
        Ok(Image {
            width: w,
            height: h,
            data,
            fov: bits.map(|bits| Mask { width: w, height: h, bits }),
        })
    }
}
