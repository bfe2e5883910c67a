//! Paired LR/HR manifests for original and simulated low-resolution input.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SequenceRecord, Split, SplitManifest};
use crate::fibresim::{simulate_lr, ExtractionMode, FibreLayout, NoiseModel};
use crate::imagecore::{load_image, save_image, BitDepthPolicy};
use crate::mosaic::numbered_frames;
use crate::provenance::{derive_seed, read_csv_with_header, write_csv_with_header};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Org,
    Syn,
}

/// Where the LR half of each pair comes from.
pub enum LrSource<'a> {
    /// Acquired frames under `root`, mirroring the HR layout file for file.
    Org { root: &'a Path },
    /// Frames simulated from each HR frame and written under `out_root`.
    Syn { layout: &'a FibreLayout, noise: NoiseModel, mode: ExtractionMode, out_root: &'a Path },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    /// Relative to the header's `lr_root`.
    pub lr_path: PathBuf,
    /// Relative to the header's `hr_root`.
    pub hr_path: PathBuf,
    pub origin: Origin,
    pub sequence_id: String,
    pub frame_index: usize,
    pub split: Split,
}

pub const PAIR_COLUMNS: [&str; 6] = ["lr_path", "hr_path", "origin", "sequence_id", "frame_index", "split"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairHeader {
    pub origin: Origin,
    pub hr_root: PathBuf,
    pub lr_root: PathBuf,
    pub split_seed: u64,
    /// Base seed of the per-frame noise streams (syn only).
    pub noise_seed: Option<u64>,
    pub layout_hash: Option<String>,
    pub sigma_mult: Option<f64>,
    pub sigma_add_rel: Option<f64>,
    pub mode: Option<ExtractionMode>,
    /// `sequence_id/frame_index` of frames that could not be paired.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairManifest {
    pub header: PairHeader,
    pub rows: Vec<PairRow>,
}

impl PairManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_csv_with_header(path, &serde_json::to_value(&self.header)?, &PAIR_COLUMNS, &self.rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (h, rows) = read_csv_with_header::<PairRow>(path)?;
        Ok(Self { header: serde_json::from_value(h)?, rows })
    }
}

struct Job<'a> {
    record: &'a SequenceRecord,
    split: Split,
    index: usize,
    hr: PathBuf,
}

/// One row per HR frame of every sequence in `split`. Syn frames use the
/// noise stream `derive_seed(noise.seed, "<sequence_id>/<frame_index>")`.
/// Frames that fail to load or simulate are logged, listed in the header and
/// skipped; a sequence whose HR directory is missing is an error.
pub fn build_pairs(split: &SplitManifest, records: &[SequenceRecord], hr_root: &Path, source: LrSource<'_>) -> Result<PairManifest> {
    let by_id: BTreeMap<&str, &SequenceRecord> = records.iter().map(|r| (r.sequence_id.as_str(), r)).collect();
    let mut jobs = Vec::new();
    for row in &split.rows {
        let record = by_id
            .get(row.sequence_id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("split lists `{}` which has no record", row.sequence_id)))?;
        let dir = hr_root.join(&record.frame_dir);
        if !dir.is_dir() {
            return Err(Error::Read {
                path: dir,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing HR frame directory"),
            });
        }
        for (index, hr) in numbered_frames(&dir)?.into_iter().enumerate() {
            jobs.push(Job { record, split: row.split, index, hr });
        }
    }

    if let LrSource::Syn { noise, .. } = &source {
        noise.validate()?;
    }
    let results: Vec<Result<PairRow>> = jobs.par_iter().map(|job| pair_one(job, hr_root, &source)).collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                let key = format!("{}/{}", job.record.sequence_id, job.index);
                log::warn!("skipping frame {key}: {e}");
                skipped.push(key);
            }
        }
    }
    let header = match &source {
        LrSource::Org { root } => PairHeader {
            origin: Origin::Org,
            hr_root: hr_root.to_path_buf(),
            lr_root: root.to_path_buf(),
            split_seed: split.seed,
            noise_seed: None,
            layout_hash: None,
            sigma_mult: None,
            sigma_add_rel: None,
            mode: None,
            skipped,
        },
        LrSource::Syn { layout, noise, mode, out_root } => PairHeader {
            origin: Origin::Syn,
            hr_root: hr_root.to_path_buf(),
            lr_root: out_root.to_path_buf(),
            split_seed: split.seed,
            noise_seed: Some(noise.seed),
            layout_hash: Some(layout.hash()),
            sigma_mult: Some(noise.sigma_mult),
            sigma_add_rel: Some(noise.sigma_add_rel),
            mode: Some(*mode),
            skipped,
        },
    };
    Ok(PairManifest { header, rows })
}

fn pair_one(job: &Job<'_>, hr_root: &Path, source: &LrSource<'_>) -> Result<PairRow> {
    let rel = job.hr.strip_prefix(hr_root).expect("frame path lies under the HR root").to_path_buf();
    let (lr_path, origin) = match source {
        LrSource::Org { root } => {
            let lr = root.join(&rel);
            if !lr.is_file() {
                return Err(Error::Read {
                    path: lr,
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing LR frame"),
                });
            }
            (rel.clone(), Origin::Org)
        }
        LrSource::Syn { layout, noise, mode, out_root } => {
            let mut hr = load_image(&job.hr, BitDepthPolicy::default())?;
            if hr.fov().is_none() && (hr.width(), hr.height()) == (layout.width(), layout.height()) {
                hr.set_fov(Some(layout.fov().clone()))?;
            }
            let model = NoiseModel { seed: derive_seed(noise.seed, &format!("{}/{}", job.record.sequence_id, job.index)), ..*noise };
            let sim = simulate_lr(&hr, layout, &model, *mode)?;
            let lr_rel = rel.with_extension("png");
            let out = out_root.join(&lr_rel);
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent).map_err(|source| Error::Write { path: parent.to_path_buf(), source })?;
            }
            let report = save_image(&sim.image, &out, 16)?;
            if report.clamped > 0 {
                log::debug!("{}: {} LR values clamped on save", out.display(), report.clamped);
            }
            (lr_rel, Origin::Syn)
        }
    };
    Ok(PairRow {
        lr_path,
        hr_path: rel,
        origin,
        sequence_id: job.record.sequence_id.clone(),
        frame_index: job.index,
        split: job.split,
    })
}
