//! Tooling for probe-based confocal laser endomicroscopy (pCLE) super-resolution
//! experiments: fibre-bundle simulation of low-resolution frames, pseudo
//! ground-truth estimation by video mosaicking, classical enhancement
//! baselines, image-quality scoring and reproducible dataset assembly.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod fibresim;
pub mod imagecore;
pub mod iqa;
pub mod mosaic;
pub mod provenance;
pub mod spectral;

pub use error::{Error, Result};
pub use imagecore::{Image, Mask};
